use ndarray::{s, Array1, Array3, Axis};

use crate::error::{Error, Result};
use crate::tt::RealTT;

/// Gradient of `sum (v - c A(g))^2` with respect to every core entry.
#[derive(Clone, Debug)]
pub struct GradientBatch {
    pub loss: f64,
    pub cores: Vec<Array3<f64>>,
}

/// Loss `sum (v - 2^N A(g))^2` over `batch` and its analytic gradient.
///
/// The prediction is linear in each core: with left environment `l` (row)
/// and right environment `r` (column) around site `i`, it is
/// `2^N l G_i[:, g_i, :] r`, so the gradient is `-2 (v - f) 2^N l^T r^T` on
/// slice `g_i`.
pub fn gradient_l<'a, I>(recon: &RealTT, batch: I) -> Result<GradientBatch>
where
    I: IntoIterator<Item = (&'a [u8], f64)>,
{
    let scale = 2f64.powi(recon.len() as i32);
    accumulate(recon, batch, scale)
}

pub(crate) fn accumulate<'a, I>(tt: &RealTT, batch: I, scale: f64) -> Result<GradientBatch>
where
    I: IntoIterator<Item = (&'a [u8], f64)>,
{
    let n = tt.len();
    let mut grads: Vec<Array3<f64>> = tt.cores().iter().map(|c| Array3::zeros(c.raw_dim())).collect();
    let mut loss = 0.0;
    let mut lefts: Vec<Array1<f64>> = Vec::with_capacity(n + 1);
    let mut rights: Vec<Array1<f64>> = vec![Array1::zeros(0); n + 1];
    for (idx, v) in batch {
        if idx.len() != n {
            return Err(Error::DimensionMismatch { site: idx.len().min(n), detail: format!("string of length {} for {n} sites", idx.len()) });
        }
        lefts.clear();
        lefts.push(Array1::ones(1));
        for (k, &g) in idx.iter().enumerate() {
            let core = tt.core(k);
            if g as usize >= core.dim().1 {
                return Err(Error::DimensionMismatch { site: k, detail: format!("index {g} out of range") });
            }
            let next = lefts[k].dot(&core.index_axis(Axis(1), g as usize));
            lefts.push(next);
        }
        rights[n] = Array1::ones(1);
        for k in (0..n).rev() {
            rights[k] = tt.core(k).index_axis(Axis(1), idx[k] as usize).dot(&rights[k + 1]);
        }
        let f = scale * lefts[n][0];
        let resid = v - f;
        loss += resid * resid;
        let coef = -2.0 * resid * scale;
        if coef == 0.0 {
            continue;
        }
        for (k, &g) in idx.iter().enumerate() {
            let (l, r) = (&lefts[k], &rights[k + 1]);
            let mut slab = grads[k].slice_mut(s![.., g as usize, ..]);
            for (a, &la) in l.iter().enumerate() {
                if la != 0.0 {
                    slab.row_mut(a).scaled_add(coef * la, r);
                }
            }
        }
    }
    Ok(GradientBatch { loss, cores: grads })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::loss_l;
    use proptest::prelude::*;
    use rand::Rng;

    fn batch(n: usize, count: usize, seed: u64) -> Vec<(Vec<u8>, f64)> {
        let mut rng = crate::rng::seeded(seed);
        (0..count).map(|_| ((0..n).map(|_| rng.random_range(0..4u8)).collect(), rng.random_range(-1.0..1.0))).collect()
    }

    fn view(b: &[(Vec<u8>, f64)]) -> impl Iterator<Item = (&[u8], f64)> + Clone {
        b.iter().map(|(k, v)| (k.as_slice(), *v))
    }

    fn check_fd(tt: &RealTT, data: &[(Vec<u8>, f64)]) -> std::result::Result<(), String> {
        let g = gradient_l(tt, view(data)).unwrap();
        let h = 1e-6;
        for site in 0..tt.len() {
            for (pos, &an) in g.cores[site].indexed_iter() {
                let bump = |delta: f64| {
                    let mut cores = tt.cores().to_vec();
                    cores[site][pos] += delta;
                    loss_l(view(data), &RealTT::new(cores).unwrap()).unwrap()
                };
                let fd = (bump(h) - bump(-h)) / (2.0 * h);
                let scale = an.abs().max(fd.abs()).max(1e-3);
                if (an - fd).abs() > 1e-5 * scale {
                    return Err(format!("site {site} {pos:?}: analytic {an} vs fd {fd}"));
                }
            }
        }
        Ok(())
    }

    #[test]
    fn loss_matches_metric() {
        let tt = RealTT::random(&[4; 3], 2, 1).unwrap();
        let data = batch(3, 20, 2);
        let g = gradient_l(&tt, view(&data)).unwrap();
        assert!((g.loss - loss_l(view(&data), &tt).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn zero_residual_gives_zero_gradient() {
        let tt = RealTT::random(&[4; 3], 2, 1).unwrap();
        let data: Vec<(Vec<u8>, f64)> = batch(3, 10, 3).into_iter().map(|(k, _)| { let v = 8.0 * tt.element_unchecked(&k); (k, v) }).collect();
        let g = gradient_l(&tt, view(&data)).unwrap();
        assert!(g.cores.iter().all(|c| c.iter().all(|&x| x.abs() < 1e-12)));
    }

    #[test]
    fn matches_finite_differences_small_case() {
        let tt = RealTT::random(&[4; 3], 2, 7).unwrap().scaled(0.3);
        check_fd(&tt, &batch(3, 30, 8)).unwrap();
    }

    #[test]
    fn loss_drops_along_small_negative_gradient_step() {
        let tt = RealTT::random(&[4; 4], 2, 4).unwrap().scaled(0.2);
        let data = batch(4, 40, 5);
        let g = gradient_l(&tt, view(&data)).unwrap();
        let cores: Vec<_> = tt.cores().iter().zip(&g.cores).map(|(c, d)| c - &(d * 1e-7)).collect();
        let after = loss_l(view(&data), &RealTT::new(cores).unwrap()).unwrap();
        assert!(after < g.loss);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn gradient_matches_finite_differences(seed in 0u64..10_000, n in 2usize..4, chi in 1usize..3) {
            let tt = RealTT::random(&[4; 3][..n], chi, seed).unwrap().scaled(0.3);
            let data = batch(n, 12, seed + 1);
            prop_assert!(check_fd(&tt, &data).is_ok(), "{:?}", check_fd(&tt, &data));
        }
    }
}
