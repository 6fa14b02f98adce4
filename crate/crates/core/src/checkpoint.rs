//! Text checkpoints holding a model, the graph it was trained on (by
//! checksum) and optionally the optimiser state needed to resume training.
//!
//! ```text
//! fgrnn-checkpoint 1
//! family chebyshev
//! activation tanh
//! propagation first_order
//! n_features 3
//! graph_checksum 3f9a…
//! epochs_done 10
//! alpha 7.6694569948304234e-1
//! beta 4.8303631647858036e-1
//! matrix W 1 3
//! …
//! vector b 128
//! …
//! adam 160 3.874e-3 9e-1 9e-1 9.99e-1 1e-8
//! vector adam_m 265
//! vector adam_v 265
//! ```
//!
//! Floats are written with 17 significant digits so a save/load round trip is
//! exact.

use std::path::Path;

use crate::cells::{ConvFamily, Filter, ModelParams};
use crate::error::{Error, Result};
use crate::gconv::{ChebFilter, FeatureTransform};
use crate::linalg::DenseMatrix;
use crate::training::{AdamState, TrainState};

const MAGIC: &str = "fgrnn-checkpoint";
const VERSION: &str = "1";

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    /// `F`; needed because Chebyshev filters do not record it.
    pub n_features: usize,
    pub graph_checksum: String,
    pub epochs_done: usize,
    pub optimizer: Option<AdamState>,
}

impl Checkpoint {
    pub fn from_state(state: &TrainState, n_features: usize, graph_checksum: String) -> Self {
        Self {
            params: state.params.clone(),
            n_features,
            graph_checksum,
            epochs_done: state.epochs_done,
            optimizer: Some(state.optimizer.clone()),
        }
    }

    /// Training state for resuming; fails when no optimiser state was saved.
    pub fn train_state(&self) -> Result<TrainState> {
        let optimizer = self
            .optimizer
            .clone()
            .ok_or_else(|| Error::config("checkpoint has no optimiser state to resume from"))?;
        Ok(TrainState {
            params: self.params.clone(),
            optimizer,
            epochs_done: self.epochs_done,
        })
    }

    /// Fails with a config error unless `checksum` matches the saved one.
    pub fn check_graph(&self, checksum: &str) -> Result<()> {
        if self.graph_checksum == checksum {
            Ok(())
        } else {
            Err(Error::config(format!(
                "graph checksum {checksum} does not match the checkpoint's {}",
                self.graph_checksum
            )))
        }
    }

    pub fn to_text(&self) -> String {
        let p = &self.params;
        let mut s = format!("{MAGIC} {VERSION}\n");
        s.push_str(&format!("family {}\n", p.family().name()));
        s.push_str(&format!("activation {}\n", p.activation.name()));
        s.push_str(&format!("propagation {}\n", p.propagation.name()));
        s.push_str(&format!("n_features {}\n", self.n_features));
        s.push_str(&format!("graph_checksum {}\n", self.graph_checksum));
        s.push_str(&format!("epochs_done {}\n", self.epochs_done));
        s.push_str(&format!("alpha {:.16e}\n", p.alpha));
        s.push_str(&format!("beta {:.16e}\n", p.beta));
        write_matrix(&mut s, "W", &p.input_filter.as_matrix());
        write_matrix(&mut s, "U", &p.recurrent_filter.as_matrix());
        write_matrix(&mut s, "V", &p.readout_filter.as_matrix());
        write_vector(&mut s, "b", &p.bias);
        write_vector(&mut s, "z", &p.readout_bias);
        if let Some(a) = &self.optimizer {
            s.push_str(&format!(
                "adam {} {:.16e} {:.16e} {:.16e} {:.16e} {:.16e}\n",
                a.step, a.learning_rate, a.lr_decay_per_epoch, a.beta1, a.beta2, a.epsilon
            ));
            write_vector(&mut s, "adam_m", &a.first_moment);
            write_vector(&mut s, "adam_v", &a.second_moment);
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut r = Reader::new(text);
        let head = r.line("header")?;
        if head.len() != 2 || head[0] != MAGIC {
            return Err(r.err(format!("expected `{MAGIC} {VERSION}`")));
        }
        if head[1] != VERSION {
            return Err(r.err(format!("unsupported checkpoint version {}", head[1])));
        }
        let family: ConvFamily = r.keyed("family")?.parse().map_err(|e| r.err(e))?;
        let activation = r.keyed("activation")?.parse().map_err(|e| r.err(e))?;
        let propagation = r.keyed("propagation")?.parse().map_err(|e| r.err(e))?;
        let n_features = r.keyed_num("n_features")?;
        let graph_checksum = r.keyed("graph_checksum")?;
        let epochs_done = r.keyed_num("epochs_done")?;
        let alpha = r.keyed_num("alpha")?;
        let beta = r.keyed_num("beta")?;
        let w = r.matrix("W")?;
        let u = r.matrix("U")?;
        let v = r.matrix("V")?;
        let bias = r.vector("b")?;
        let readout_bias = r.vector("z")?;
        let filter = |m: DenseMatrix, r: &Reader| -> Result<Filter> {
            Ok(match family {
                ConvFamily::Chebyshev => {
                    if m.n_rows() != 1 {
                        return Err(r.err("Chebyshev filters are stored as one row"));
                    }
                    Filter::Chebyshev(ChebFilter::new(m.into_vec()).map_err(|e| r.err(e))?)
                }
                ConvFamily::FirstOrder => {
                    Filter::FirstOrder(FeatureTransform::new(m).map_err(|e| r.err(e))?)
                }
                ConvFamily::Dense => Filter::Dense(m),
            })
        };
        let params = ModelParams {
            activation,
            propagation,
            input_filter: filter(w, &r)?,
            recurrent_filter: filter(u, &r)?,
            readout_filter: filter(v, &r)?,
            alpha,
            beta,
            bias,
            readout_bias,
        };
        params.validate().map_err(|e| r.err(e))?;

        let optimizer = match r.peek() {
            None => None,
            Some(_) => {
                let f = r.line("adam")?;
                if f.len() != 7 || f[0] != "adam" {
                    return Err(r.err("expected `adam step lr decay beta1 beta2 epsilon`"));
                }
                let num = |s: &str| {
                    s.parse::<f64>()
                        .map_err(|_| r.err(format!("bad number `{s}`")))
                };
                let step = f[1].parse().map_err(|_| r.err("bad Adam step count"))?;
                let (lr, decay, b1, b2, eps) =
                    (num(f[2])?, num(f[3])?, num(f[4])?, num(f[5])?, num(f[6])?);
                let first_moment = r.vector("adam_m")?;
                let second_moment = r.vector("adam_v")?;
                let n = params.n_scalars();
                if first_moment.len() != n || second_moment.len() != n {
                    return Err(r.err(format!("Adam moments must have {n} entries")));
                }
                Some(AdamState {
                    first_moment,
                    second_moment,
                    step,
                    beta1: b1,
                    beta2: b2,
                    epsilon: eps,
                    learning_rate: lr,
                    lr_decay_per_epoch: decay,
                })
            }
        };
        if r.peek().is_some() {
            r.line("end")?;
            return Err(r.err("unexpected trailing content"));
        }
        Ok(Self {
            params,
            n_features,
            graph_checksum,
            epochs_done,
            optimizer,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

fn write_matrix(s: &mut String, name: &str, m: &DenseMatrix) {
    s.push_str(&format!("matrix {name} {} {}\n", m.n_rows(), m.n_cols()));
    for i in 0..m.n_rows() {
        push_values(s, m.row(i));
    }
}

fn write_vector(s: &mut String, name: &str, v: &[f64]) {
    s.push_str(&format!("vector {name} {}\n", v.len()));
    push_values(s, v);
}

fn push_values(s: &mut String, v: &[f64]) {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.16e}")).collect();
    s.push_str(&parts.join(" "));
    s.push('\n');
}

/// Line cursor that skips blanks and `#` comments and remembers the current
/// line number for errors.
struct Reader<'a> {
    lines: Vec<(usize, &'a str)>,
    pos: usize,
    line_no: usize,
}

impl<'a> Reader<'a> {
    fn new(text: &'a str) -> Self {
        let lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .collect();
        Self {
            lines,
            pos: 0,
            line_no: 1,
        }
    }

    fn err(&self, msg: impl ToString) -> Error {
        Error::parse(self.line_no, msg.to_string())
    }

    fn peek(&self) -> Option<&'a str> {
        self.lines.get(self.pos).map(|&(_, l)| l)
    }

    fn line(&mut self, what: &str) -> Result<Vec<&'a str>> {
        match self.lines.get(self.pos) {
            Some(&(n, l)) => {
                self.line_no = n;
                self.pos += 1;
                Ok(l.split_whitespace().collect())
            }
            None => {
                self.line_no = self.lines.last().map_or(1, |&(n, _)| n + 1);
                Err(self.err(format!("unexpected end of file, expected {what}")))
            }
        }
    }

    fn keyed(&mut self, key: &str) -> Result<String> {
        let f = self.line(key)?;
        if f.len() != 2 || f[0] != key {
            return Err(self.err(format!("expected `{key} <value>`")));
        }
        Ok(f[1].to_string())
    }

    fn keyed_num<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let v = self.keyed(key)?;
        v.parse()
            .map_err(|_| self.err(format!("invalid {key} `{v}`")))
    }

    fn numbers(&mut self, what: &str, expected: usize) -> Result<Vec<f64>> {
        let f = self.line(what)?;
        if f.len() != expected {
            return Err(self.err(format!(
                "{what}: expected {expected} values, found {}",
                f.len()
            )));
        }
        f.iter()
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| self.err(format!("{what}: invalid number `{s}`")))
            })
            .collect()
    }

    fn matrix(&mut self, name: &str) -> Result<DenseMatrix> {
        let f = self.line(name)?;
        let dims = (f.len() == 4 && f[0] == "matrix" && f[1] == name)
            .then(|| Some((f[2].parse::<usize>().ok()?, f[3].parse::<usize>().ok()?)))
            .flatten();
        let (rows, cols) =
            dims.ok_or_else(|| self.err(format!("expected `matrix {name} <rows> <cols>`")))?;
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            data.extend(self.numbers(name, cols)?);
        }
        DenseMatrix::from_vec(rows, cols, data).map_err(|e| self.err(e))
    }

    fn vector(&mut self, name: &str) -> Result<Vec<f64>> {
        let f = self.line(name)?;
        let len = (f.len() == 3 && f[0] == "vector" && f[1] == name)
            .then(|| f[2].parse::<usize>().ok())
            .flatten()
            .ok_or_else(|| self.err(format!("expected `vector {name} <len>`")))?;
        if len == 0 {
            return Ok(Vec::new());
        }
        self.numbers(name, len)
    }
}
