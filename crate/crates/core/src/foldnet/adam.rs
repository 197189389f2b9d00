use super::params::{Gradients, NetworkParams};
use super::Scalar;
use crate::error::Result;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Adam moment estimates, laid out like the parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub m: NetworkParams<T>,
    pub v: NetworkParams<T>,
    pub step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &NetworkParams<T>) -> Self {
        AdamState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }
}

/// One bias-corrected Adam update.
pub fn adam_step<T: Scalar>(
    state: &mut AdamState<T>,
    params: &mut NetworkParams<T>,
    grads: &Gradients<T>,
    lr: f64,
) -> Result<()> {
    params.check_layout(grads)?;
    params.check_layout(&state.m)?;
    params.check_layout(&state.v)?;
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - BETA1.powi(t);
    let c2 = 1.0 - BETA2.powi(t);
    let cast = |v: f64| T::from(v).unwrap_or_else(T::zero);
    let (b1, b2, eps) = (cast(BETA1), cast(BETA2), cast(EPSILON));
    let (one_b1, one_b2) = (cast(1.0 - BETA1), cast(1.0 - BETA2));
    let (c1, c2, lr) = (cast(c1), cast(c2), cast(lr));
    for (ti, p) in params.tensors.iter_mut().enumerate() {
        let g = &grads.tensors[ti].data;
        let m = &mut state.m.tensors[ti].data;
        let v = &mut state.v.tensors[ti].data;
        for i in 0..p.data.len() {
            m[i] = b1 * m[i] + one_b1 * g[i];
            v[i] = b2 * v[i] + one_b2 * g[i] * g[i];
            let mhat = m[i] / c1;
            let vhat = v[i] / c2;
            p.data[i] = p.data[i] - lr * mhat / (vhat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::foldnet::params::Architecture;

    #[test]
    fn zero_gradient_is_fixed_point() {
        let a = Architecture::desk(8);
        let mut p = NetworkParams::<f64>::init(&a, 1).unwrap();
        let before = p.clone();
        let mut s = AdamState::new(&p);
        let g = p.zeros_like();
        adam_step(&mut s, &mut p, &g, 0.1).unwrap();
        assert_eq!(p, before);
        assert_eq!(s.m, p.zeros_like());
        assert_eq!(s.step, 1);
    }

    #[test]
    fn first_step_by_hand() {
        let a = Architecture::desk(8);
        let mut p = NetworkParams::<f64>::zeros(&a);
        p.tensors[0].data[0] = 1.0;
        let mut g = p.zeros_like();
        g.tensors[0].data[0] = 1.0;
        let mut s = AdamState::new(&p);
        adam_step(&mut s, &mut p, &g, 0.1).unwrap();
        // m̂ = 1, v̂ = 1
        let expect = 1.0 - 0.1 * (1.0 / (1.0 + 1e-8));
        assert!((p.tensors[0].data[0] - expect).abs() < 1e-12);
        assert_eq!(p.tensors[1].data[0], 0.0);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut p = NetworkParams::<f32>::zeros(&Architecture::desk(8));
        let g = NetworkParams::<f32>::zeros(&Architecture::desk(16));
        let mut s = AdamState::new(&p);
        assert!(adam_step(&mut s, &mut p, &g, 0.1).is_err());
    }

    #[test]
    fn trajectories_repeat() {
        let a = Architecture::desk(8);
        let run = || {
            let mut p = NetworkParams::<f32>::init(&a, 2).unwrap();
            let mut g = p.clone();
            g.scale(0.5);
            let mut s = AdamState::new(&p);
            for _ in 0..3 {
                adam_step(&mut s, &mut p, &g, 0.01).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }
}
