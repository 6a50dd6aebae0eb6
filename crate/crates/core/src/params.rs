//! Uniform access to learnable parameters as named flat `f64` slices.
//!
//! Model structs expose their tensors in a stable documented order so the
//! optimizer, gradient clipping, checkpoint serialization, and the
//! finite-difference test harness can all walk parameters without knowing
//! model internals. Gradients reuse the same struct type as their parameters,
//! so one trait serves both.

/// Stable, ordered view over every learnable scalar of a model.
pub trait ParamTensors {
    /// Named tensors in a fixed order (same order every call, same order as
    /// [`ParamTensors::tensors_mut`]).
    fn tensors(&self) -> Vec<(String, &[f64])>;

    fn tensors_mut(&mut self) -> Vec<(String, &mut [f64])>;

    fn param_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }

    /// Reads the `idx`-th scalar in flat tensor order.
    fn flat_get(&self, idx: usize) -> f64 {
        let mut rest = idx;
        for (_, t) in self.tensors() {
            if rest < t.len() {
                return t[rest];
            }
            rest -= t.len();
        }
        panic!("flat index {idx} out of range");
    }

    /// Writes the `idx`-th scalar in flat tensor order.
    fn flat_set(&mut self, idx: usize, value: f64) {
        let mut rest = idx;
        for (_, t) in self.tensors_mut() {
            if rest < t.len() {
                t[rest] = value;
                return;
            }
            rest -= t.len();
        }
        panic!("flat index {idx} out of range");
    }

    /// Name of the tensor owning the `idx`-th scalar (for test diagnostics).
    fn flat_name(&self, idx: usize) -> String {
        let mut rest = idx;
        for (name, t) in self.tensors() {
            if rest < t.len() {
                return format!("{name}[{rest}]");
            }
            rest -= t.len();
        }
        panic!("flat index {idx} out of range");
    }

    /// Global L2 norm across all tensors (used on gradient structs).
    fn global_norm(&self) -> f64 {
        self.tensors()
            .iter()
            .flat_map(|(_, t)| t.iter())
            .map(|x| x * x)
            .sum::<f64>()
            .sqrt()
    }

    /// `self += scale · other`, tensor by tensor (shapes must match).
    fn scaled_add_from(&mut self, other: &Self, scale: f64)
    where
        Self: Sized,
    {
        let theirs = other.tensors();
        for ((_, mine), (_, yours)) in self.tensors_mut().into_iter().zip(theirs) {
            assert_eq!(mine.len(), yours.len(), "tensor shape mismatch");
            for (a, b) in mine.iter_mut().zip(yours) {
                *a += scale * b;
            }
        }
    }

    fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|x| x.is_finite()))
    }
}

/// Central finite-difference gradient of `loss` w.r.t. the `idx`-th scalar.
/// The closure must be a pure function of the current parameter values.
pub fn finite_difference<P, F>(params: &mut P, idx: usize, step: f64, mut loss: F) -> f64
where
    P: ParamTensors,
    F: FnMut(&P) -> f64,
{
    let orig = params.flat_get(idx);
    params.flat_set(idx, orig + step);
    let up = loss(params);
    params.flat_set(idx, orig - step);
    let down = loss(params);
    params.flat_set(idx, orig);
    (up - down) / (2.0 * step)
}

/// Relative error between an analytic and a finite-difference derivative,
/// guarded for near-zero magnitudes.
pub fn gradient_rel_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}
