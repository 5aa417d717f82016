use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing mandatory column `{0}`")]
    MissingColumn(String),

    #[error("static column `{column}` varies within case `{case_id}`")]
    StaticColumnVaries { column: String, case_id: String },

    #[error("unparseable timestamp `{value}` in case `{case_id}`")]
    BadTimestamp { value: String, case_id: String },

    #[error("attribute name `{0}` is reserved")]
    ReservedAttribute(String),

    #[error("attribute `{name}` has conflicting kinds {first:?} and {second:?}")]
    SchemaConflict {
        name: String,
        first: crate::event_log::AttrKind,
        second: crate::event_log::AttrKind,
    },

    #[error("empty activity label in case `{0}`")]
    EmptyActivity(String),

    #[error("malformed XES: {0}")]
    MalformedXes(String),

    #[error("event without `concept:name` in trace `{0}`")]
    EventWithoutName(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("split fractions must sum to 100, got {0}")]
    BadFractions(f64),

    #[error("cannot split an empty log")]
    EmptyLog,

    #[error("case `{0}` has no events")]
    EmptyCase(String),

    #[error("formula syntax error at byte {position}: {message}")]
    FormulaSyntax { position: usize, message: String },

    #[error("cannot evaluate a formula on an empty trace")]
    EmptyTrace,

    #[error("prefix length {got} does not match schema length {expected}")]
    PrefixLength { expected: usize, got: usize },

    #[error("encoding schema of kind {0} cannot encode this prefix")]
    WrongEncoding(&'static str),

    #[error("feature vector schema {got:#x} does not match model schema {expected:#x}")]
    SchemaMismatch { expected: u64, got: u64 },

    #[error("invalid thresholds: T2 ({t2}) must be >= 0 and below T1 ({t1})")]
    BadThresholds { t1: f64, t2: f64 },

    #[error("no items to cluster")]
    NoItems,

    #[error("canopy model has no canopies")]
    EmptyModel,

    #[error("training data is empty")]
    EmptyTrainingData,

    #[error("offline model cannot be updated incrementally; rediscovery required")]
    RediscoveryRequired,

    #[error("prefix length {len} outside configured range [{min}, {max}]")]
    PrefixOutOfRange { len: usize, min: usize, max: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("confusion table is empty")]
    EmptyCounts,

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("unsupported model format version {0}")]
    ModelVersion(u32),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
