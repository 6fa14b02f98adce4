use std::str::FromStr;

use crate::error::{Error, Result};

/// Architectures whose trainable-parameter counts can be computed. Only the
/// first three are implemented as models; the LSTM rows are count formulas.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamFamily {
    Chebyshev,
    FirstOrder,
    DenseFrnn,
    LstmDense,
    LstmGcn,
}

impl ParamFamily {
    pub const NAMES: &'static [&'static str] = &[
        "chebyshev",
        "first_order",
        "dense",
        "lstm_dense",
        "lstm_gcn",
    ];
}

impl FromStr for ParamFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chebyshev" | "cheb" => Ok(ParamFamily::Chebyshev),
            "first_order" | "first-order" => Ok(ParamFamily::FirstOrder),
            "dense" | "frnn" | "dense_frnn" => Ok(ParamFamily::DenseFrnn),
            "lstm_dense" | "lstm" => Ok(ParamFamily::LstmDense),
            "lstm_gcn" => Ok(ParamFamily::LstmGcn),
            _ => Err(Error::config(format!(
                "unknown family `{s}` (valid: {})",
                Self::NAMES.join(", ")
            ))),
        }
    }
}

/// Trainable parameters for `N` nodes, Chebyshev order `K` and hidden size
/// `P`:
///
/// | family | count |
/// |---|---|
/// | chebyshev | 3K + 2N + 2 |
/// | first_order | 3P² + 2N + 2 |
/// | dense FRNN | 3N² + 2N + 2 |
/// | LSTM (dense) | 8N² + 4N |
/// | LSTM + GCN | 4N + 8K |
pub fn count_params(family: ParamFamily, n: u64, k: u64, p: u64) -> u64 {
    match family {
        ParamFamily::Chebyshev => 3 * k + 2 * n + 2,
        ParamFamily::FirstOrder => 3 * p * p + 2 * n + 2,
        ParamFamily::DenseFrnn => 3 * n * n + 2 * n + 2,
        ParamFamily::LstmDense => 8 * n * n + 4 * n,
        ParamFamily::LstmGcn => 4 * n + 8 * k,
    }
}
