//! Cases shipped with the crate.

/// Three-machine nine-bus desk system with two wind farms and two PFR lines.
pub const DESK9: &str = include_str!("../data/desk9.case");

/// Single machine against an infinite bus; transfer limits 2.0 / 0 / 1.5 p.u.
/// before, during and after a terminal fault cleared by tripping line 2.
pub const SMIB: &str = include_str!("../data/smib.case");

/// Pipeline settings for [`DESK9`]: sampling, contingency C1, cut margin.
pub const DESK9_CONFIG: &str = include_str!("../data/desk9.toml");

/// Pipeline settings for [`SMIB`].
pub const SMIB_CONFIG: &str = include_str!("../data/smib.toml");
