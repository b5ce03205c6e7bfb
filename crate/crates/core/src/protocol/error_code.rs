use std::fmt;

/// Integer error code carried by an `ERR` reply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ErrorCode(pub u32);

impl ErrorCode {
    pub const MALFORMED_REQUEST: ErrorCode = ErrorCode(100);
    pub const UNKNOWN_COMMAND: ErrorCode = ErrorCode(101);
    pub const UNKNOWN_PHYSICAL_MACHINE: ErrorCode = ErrorCode(200);
    pub const UNKNOWN_REPOSITORY: ErrorCode = ErrorCode(201);
    pub const UNKNOWN_SERVICE: ErrorCode = ErrorCode(202);
    pub const UNKNOWN_VM: ErrorCode = ErrorCode(203);
    pub const NO_CAPACITY: ErrorCode = ErrorCode(300);
    pub const INVALID_STATE_TRANSITION: ErrorCode = ErrorCode(301);
    pub const DUPLICATE_REGISTRATION: ErrorCode = ErrorCode(302);
    pub const UPSTREAM_FAILURE: ErrorCode = ErrorCode(400);
    pub const INTERNAL_ERROR: ErrorCode = ErrorCode(500);

    /// Every code a TAAROA server may emit.
    pub const REGISTRY: [ErrorCode; 11] = [
        Self::MALFORMED_REQUEST,
        Self::UNKNOWN_COMMAND,
        Self::UNKNOWN_PHYSICAL_MACHINE,
        Self::UNKNOWN_REPOSITORY,
        Self::UNKNOWN_SERVICE,
        Self::UNKNOWN_VM,
        Self::NO_CAPACITY,
        Self::INVALID_STATE_TRANSITION,
        Self::DUPLICATE_REGISTRATION,
        Self::UPSTREAM_FAILURE,
        Self::INTERNAL_ERROR,
    ];

    pub fn name(self) -> Option<&'static str> {
        Some(match self.0 {
            100 => "MALFORMED_REQUEST",
            101 => "UNKNOWN_COMMAND",
            200 => "UNKNOWN_PHYSICAL_MACHINE",
            201 => "UNKNOWN_REPOSITORY",
            202 => "UNKNOWN_SERVICE",
            203 => "UNKNOWN_VM",
            300 => "NO_CAPACITY",
            301 => "INVALID_STATE_TRANSITION",
            302 => "DUPLICATE_REGISTRATION",
            400 => "UPSTREAM_FAILURE",
            500 => "INTERNAL_ERROR",
            _ => return None,
        })
    }

    pub fn is_registered(self) -> bool {
        Self::REGISTRY.contains(&self)
    }
}

impl fmt::Display for ErrorCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.name() {
            Some(name) => write!(f, "{} {}", self.0, name),
            None => write!(f, "{}", self.0),
        }
    }
}
