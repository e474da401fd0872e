//! Continuous-filter convolutions over the 3D view.
//!
//! Interaction rule: h_i ← MLP(Σ_j h_j ⊙ W(r_ij)) + h_i, with the filter
//! W(r_ij) generated from a radial-basis expansion of the pairwise distance:
//! rbf_k(d) = exp(−γ (d − μ_k)²) over evenly spaced centers μ. Distances enter
//! as constants, so the embedding depends on geometry only through them and is
//! invariant to rigid motions by construction. The self pair (i = i) is
//! included; distance zero is a valid input.

use super::{maybe_dropout, shape_err, EncoderError, ModelConfig};
use crate::featurize::{MolViews, N_ATOM_TYPES};
use crate::nn::{linear, Bound, Graph, Var};
use ndarray::Array2;
use rand_chacha::ChaCha8Rng;

/// Evenly spaced RBF centers on [0, rbf_max].
pub fn rbf_centers(cfg: &ModelConfig) -> Vec<f64> {
    let n = cfg.rbf_count;
    (0..n).map(|k| cfg.rbf_max * k as f64 / (n - 1) as f64).collect()
}

pub fn schnet_forward(
    g: &mut Graph,
    bound: &Bound,
    cfg: &ModelConfig,
    views: &MolViews,
    mut train_rng: Option<&mut ChaCha8Rng>,
) -> Result<Var, EncoderError> {
    let n = views.n_atoms;
    if n == 0 {
        return Err(shape_err("schnet", "empty graph"));
    }
    let Some(positions) = views.positions.as_ref() else {
        return Err(shape_err("schnet", "positions missing"));
    };
    if positions.len() != n {
        return Err(shape_err(
            "schnet",
            format!("{} position rows for {} atoms", positions.len(), n),
        ));
    }
    let mut types = Vec::with_capacity(n);
    for &[t, _] in &views.atom_feats {
        if t >= N_ATOM_TYPES {
            return Err(shape_err("schnet", "atom type out of range"));
        }
        types.push(t);
    }

    // all ordered pairs within the cutoff; the self pair always participates
    let centers = rbf_centers(cfg);
    let mut src = Vec::new();
    let mut dst = Vec::new();
    let mut dists = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let d = dist(positions[i], positions[j]);
            if i != j {
                if let Some(cut) = cfg.schnet_cutoff {
                    if d > cut {
                        continue;
                    }
                }
            }
            src.push(j);
            dst.push(i);
            dists.push(d);
        }
    }
    let mut rbf = Array2::zeros((dists.len(), cfg.rbf_count));
    for (p, &d) in dists.iter().enumerate() {
        for (k, &mu) in centers.iter().enumerate() {
            rbf[[p, k]] = (-cfg.rbf_gamma * (d - mu) * (d - mu)).exp();
        }
    }
    let rbf = g.constant(rbf);

    let mut h = g.gather_rows(bound.var("schnet.atom_embed"), types);
    for k in 0..cfg.schnet_layers {
        let f1 = linear(
            g,
            rbf,
            bound.var(&format!("schnet.layer{k}.filter.w1")),
            bound.var(&format!("schnet.layer{k}.filter.b1")),
        );
        let f1 = g.relu(f1);
        let filt = linear(
            g,
            f1,
            bound.var(&format!("schnet.layer{k}.filter.w2")),
            bound.var(&format!("schnet.layer{k}.filter.b2")),
        );
        let xj = g.gather_rows(h, src.clone());
        let msg = g.mul_elem(xj, filt);
        let agg = g.segment_sum(msg, dst.clone(), n);
        let u = linear(
            g,
            agg,
            bound.var(&format!("schnet.layer{k}.update.w1")),
            bound.var(&format!("schnet.layer{k}.update.b1")),
        );
        let u = g.relu(u);
        let u = maybe_dropout(g, u, cfg.dropout.schnet, train_rng.as_deref_mut());
        let u = linear(
            g,
            u,
            bound.var(&format!("schnet.layer{k}.update.w2")),
            bound.var(&format!("schnet.layer{k}.update.b2")),
        );
        h = g.add(h, u);
    }
    let pooled = g.mean_axis0(h);
    let z = linear(g, pooled, bound.var("schnet.out.w"), bound.var("schnet.out.b"));
    if g.value(z).iter().any(|v| !v.is_finite()) {
        return Err(EncoderError::DegenerateGeometry);
    }
    Ok(z)
}

fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;
    use crate::encoders::init_encoder_params;
    use crate::featurize::{build_views, BpeVocab, MolViews};
    use crate::nn::ParamSet;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;

    fn setup() -> (ModelConfig, ParamSet, BpeVocab) {
        let cfg = ModelConfig::desk();
        let mut ps = ParamSet::new();
        init_encoder_params(&cfg, 4, &mut ps);
        let vocab = BpeVocab::train(&["CCON=#()123".to_string()], 15).unwrap();
        (cfg, ps, vocab)
    }

    fn embed(cfg: &ModelConfig, ps: &ParamSet, views: &MolViews) -> Vec<f64> {
        let mut g = Graph::new();
        let bound = crate::nn::Bound::new(&mut g, ps, &[]);
        let z = schnet_forward(&mut g, &bound, cfg, views, None).unwrap();
        g.value(z).iter().copied().collect()
    }

    fn rotate(p: [f64; 3], axis_angle: (usize, f64)) -> [f64; 3] {
        let (axis, th) = axis_angle;
        let (s, c) = th.sin_cos();
        match axis {
            0 => [p[0], c * p[1] - s * p[2], s * p[1] + c * p[2]],
            1 => [c * p[0] + s * p[2], p[1], -s * p[0] + c * p[2]],
            _ => [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]],
        }
    }

    #[test]
    fn rbf_peaks_at_centers() {
        let cfg = ModelConfig::desk();
        let centers = rbf_centers(&cfg);
        assert_eq!(centers.len(), cfg.rbf_count);
        assert_eq!(centers[0], 0.0);
        assert_eq!(*centers.last().unwrap(), cfg.rbf_max);
        for &mu in centers.iter().take(5) {
            let v = (-cfg.rbf_gamma * (mu - mu) * (mu - mu)).exp();
            assert_eq!(v, 1.0);
        }
    }

    #[test]
    fn se3_invariance() {
        let (cfg, ps, vocab) = setup();
        let mol = parse_smiles("CCO").unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let coords: Vec<[f64; 3]> = (0..3)
            .map(|_| [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
            .collect();
        let base = embed(&cfg, &ps, &build_views(&mol, Some(&coords), &vocab, cfg.fp_bits, cfg.fp_radius).unwrap());
        for trial in 0..10 {
            let axis = trial % 3;
            let angle = rng.random_range(0.0..std::f64::consts::TAU);
            let shift = [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)];
            let moved: Vec<[f64; 3]> = coords
                .iter()
                .map(|&p| {
                    let r = rotate(p, (axis, angle));
                    [r[0] + shift[0], r[1] + shift[1], r[2] + shift[2]]
                })
                .collect();
            let z = embed(&cfg, &ps, &build_views(&mol, Some(&moved), &vocab, cfg.fp_bits, cfg.fp_radius).unwrap());
            for (a, b) in base.iter().zip(&z) {
                assert!((a - b).abs() < 1e-5, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn single_atom_matches_closed_form() {
        let (cfg, ps, vocab) = setup();
        let mol = parse_smiles("C").unwrap();
        let coords = [[0.0, 0.0, 0.0]];
        let views = build_views(&mol, Some(&coords), &vocab, cfg.fp_bits, cfg.fp_radius).unwrap();
        let z = embed(&cfg, &ps, &views);

        // direct evaluation: only the self pair at distance zero contributes
        let t = views.atom_feats[0][0];
        let centers = rbf_centers(&cfg);
        let rbf = ndarray::Array2::from_shape_fn((1, cfg.rbf_count), |(_, k)| {
            (-cfg.rbf_gamma * centers[k] * centers[k]).exp()
        });
        let mut h = ndarray::Array2::zeros((1, cfg.schnet_hidden));
        h.row_mut(0).assign(&ps.get("schnet.atom_embed").row(t));
        for k in 0..cfg.schnet_layers {
            let f1 = (rbf.dot(ps.get(&format!("schnet.layer{k}.filter.w1")))
                + &ps.get(&format!("schnet.layer{k}.filter.b1")).row(0))
                .mapv(|v: f64| v.max(0.0));
            let filt = f1.dot(ps.get(&format!("schnet.layer{k}.filter.w2")))
                + &ps.get(&format!("schnet.layer{k}.filter.b2")).row(0);
            let msg = &h * &filt;
            let u = (msg.dot(ps.get(&format!("schnet.layer{k}.update.w1")))
                + &ps.get(&format!("schnet.layer{k}.update.b1")).row(0))
                .mapv(|v: f64| v.max(0.0));
            let u = u.dot(ps.get(&format!("schnet.layer{k}.update.w2")))
                + &ps.get(&format!("schnet.layer{k}.update.b2")).row(0);
            h = h + u;
        }
        let out = h.dot(ps.get("schnet.out.w")) + &ps.get("schnet.out.b").row(0);
        for (a, b) in z.iter().zip(out.row(0).iter()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn coinciding_atoms_are_allowed() {
        let (cfg, ps, vocab) = setup();
        let mol = parse_smiles("CC").unwrap();
        let coords = [[1.0, 1.0, 1.0], [1.0, 1.0, 1.0]];
        let views = build_views(&mol, Some(&coords), &vocab, cfg.fp_bits, cfg.fp_radius).unwrap();
        let z = embed(&cfg, &ps, &views);
        assert!(z.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn missing_positions_rejected() {
        let (cfg, ps, vocab) = setup();
        let mol = parse_smiles("CC").unwrap();
        let views = build_views(&mol, None, &vocab, cfg.fp_bits, cfg.fp_radius).unwrap();
        let mut g = Graph::new();
        let bound = crate::nn::Bound::new(&mut g, &ps, &[]);
        assert!(matches!(
            schnet_forward(&mut g, &bound, &cfg, &views, None),
            Err(EncoderError::Shape { .. })
        ));
    }

    #[test]
    fn cutoff_drops_far_pairs() {
        let (mut cfg, _, vocab) = setup();
        cfg.schnet_cutoff = Some(2.0);
        let mut ps = ParamSet::new();
        init_encoder_params(&cfg, 4, &mut ps);
        let mol = parse_smiles("CCC").unwrap();
        // third atom far away: with the cutoff its pair interactions vanish,
        // so moving it further must not change the embedding
        let near = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [50.0, 0.0, 0.0]];
        let far = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [90.0, 0.0, 0.0]];
        let za = embed(&cfg, &ps, &build_views(&mol, Some(&near), &vocab, cfg.fp_bits, cfg.fp_radius).unwrap());
        let zb = embed(&cfg, &ps, &build_views(&mol, Some(&far), &vocab, cfg.fp_bits, cfg.fp_radius).unwrap());
        for (a, b) in za.iter().zip(&zb) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
