//! Workspace session: config bootstrap, typed mutations with validation,
//! synchronous recompute, telemetry and snapshots.

mod config;
mod events;
mod session;
mod workspace;

pub use config::{ConfigError, DatasetConfig, WorkspaceConfig};
pub use events::{read_events, write_events, Action, LogError, Payload, SessionEvent, TelemetryDir};
pub use session::{
    replay, replay_state, Clock, Committed, ItemView, MetricView, RankedView, Service, ServiceError, ServiceOptions,
    SideBySide, SliceView, State,
};
pub use workspace::{Applied, Mutation, Rejection, Snapshot, Workspace, WorkspaceError, SNAPSHOT_FORMAT};
