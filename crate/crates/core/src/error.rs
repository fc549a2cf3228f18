use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument lies outside the domain where the function is defined or
    /// where its accuracy is guaranteed.
    #[error("{func}: {arg} = {value} is out of domain ({expected})")]
    Domain {
        func: &'static str,
        arg: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("{what}: expected length {expected}, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    /// Moment matching needs a strictly positive mean and variance.
    #[error("degenerate moments for {what}: mean = {mean}, variance = {var}")]
    Degenerate {
        what: &'static str,
        mean: f64,
        var: f64,
    },

    /// A log argument of the quadratic-transform surrogate is not positive.
    #[error("surrogate objective undefined: log argument of tag {tag} is {value}")]
    NonPositiveLog { tag: usize, value: f64 },

    /// The energy-harvesting constraints cannot be met.
    #[error("energy-harvesting constraint of tag {tag} infeasible: {detail}")]
    Infeasible { tag: usize, detail: String },
}

pub(crate) fn domain(
    func: &'static str,
    arg: &'static str,
    value: f64,
    expected: &'static str,
) -> Error {
    Error::Domain {
        func,
        arg,
        value,
        expected,
    }
}
