//! Latent mapping from the compressed-dark to the normal-light domain, the
//! Stage-2 loss and the full enhancement composition.

mod blocks;
mod enhance;
mod net;

pub use blocks::{Aspp, Attention, Enlighten, ResBlock, UNet, ASPP_DILATIONS};
pub use enhance::{enhance_image, enhance_tensor, mapping_loss, MappingLoss};
pub use net::{LevelMap, MappingNet, MappingShape};

#[cfg(test)]
mod tests {
    use super::*;
    use mlsm_autodiff::Tensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pyramid(rng: &mut ChaCha8Rng) -> Vec<Tensor<f64>> {
        [(2, 8), (3, 4), (4, 2)].iter().map(|&(c, e)| Tensor::uniform(&[1, c, e, e], -1.0, 1.0, rng)).collect()
    }

    #[test]
    fn shapes_preserved_at_every_level() {
        let m = MappingNet::<f64>::new(MappingShape::top_levels(vec![2, 3, 4], 3, true).unwrap(), 0).unwrap();
        let l = pyramid(&mut ChaCha8Rng::seed_from_u64(1));
        let out = m.map(&l).unwrap();
        for (a, b) in l.iter().zip(&out) {
            assert_eq!(a.dims(), b.dims());
        }
        for i in 0..3 {
            assert_eq!(m.enlighten_branch(i, &l[i]).unwrap().dims(), l[i].dims());
            assert_eq!(m.deblocking_branch(i, &l[i], &l[2]).unwrap().dims(), l[i].dims());
        }
    }

    #[test]
    fn inactive_levels_are_identity() {
        let m = MappingNet::<f64>::new(MappingShape::top_levels(vec![2, 3, 4], 1, false).unwrap(), 0).unwrap();
        let l = pyramid(&mut ChaCha8Rng::seed_from_u64(2));
        let out = m.map(&l).unwrap();
        assert_eq!(out[0].to_vec(), l[0].to_vec());
        assert_eq!(out[1].to_vec(), l[1].to_vec());
        assert_ne!(out[2].to_vec(), l[2].to_vec());
        assert!(m.params.iter().all(|(n, _)| n.starts_with("level2.")));
    }

    #[test]
    fn top_level_deblocking_sees_zero_residual() {
        let m = MappingNet::<f64>::new(MappingShape::top_levels(vec![2, 3, 4], 3, false).unwrap(), 5).unwrap();
        let l = pyramid(&mut ChaCha8Rng::seed_from_u64(3));
        let zero = Tensor::<f64>::zeros(l[2].dims());
        // g(l_top − l_top) must equal g(0) for the top level: feed l_top as both arguments
        let a = m.deblocking_branch(2, &l[2], &l[2]).unwrap();
        let b = m.deblocking_branch(2, &zero, &zero).unwrap();
        assert_eq!(a.to_vec(), b.to_vec());
    }

    #[test]
    fn zero_input_gives_zero_enlighten_output() {
        let m = MappingNet::<f64>::new(MappingShape::top_levels(vec![2, 3, 4], 3, false).unwrap(), 6).unwrap();
        let z = Tensor::<f64>::zeros(&[1, 3, 4, 4]);
        assert!(m.enlighten_branch(1, &z).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zeroed_branches_reduce_to_fusion_of_zero() {
        let m = MappingNet::<f64>::new(MappingShape::top_levels(vec![2, 3, 4], 3, false).unwrap(), 7).unwrap();
        for (name, t) in m.params.iter() {
            if !name.contains(".fusion.") {
                t.data_mut().iter_mut().for_each(|v| *v = 0.0);
            }
        }
        // give the fusion block a nonzero response to a zero input
        for (name, t) in m.params.iter() {
            if name.ends_with("fusion.b.norm.beta") {
                t.data_mut().iter_mut().enumerate().for_each(|(j, v)| *v = 0.1 * (j as f64 + 1.0));
            }
        }
        let l = pyramid(&mut ChaCha8Rng::seed_from_u64(4));
        for i in 0..3 {
            let got = m.map_level(i, &l[i], &l[2]).unwrap();
            let want = m.fusion(i).forward(&Tensor::zeros(l[i].dims())).unwrap();
            assert_eq!(got.to_vec(), want.to_vec());
            assert!(want.data().iter().any(|&v| v != 0.0));
        }
    }

    #[test]
    fn level_count_validated() {
        assert!(MappingShape::top_levels(vec![2, 3, 4], 0, false).is_err());
        assert!(MappingShape::top_levels(vec![2, 3, 4], 4, false).is_err());
        let bad = MappingShape { channels: vec![2, 3], active: vec![2], attention: false };
        assert!(MappingNet::<f64>::new(bad, 0).is_err());
    }
}
