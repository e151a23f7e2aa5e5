use rand::SeedableRng;

use super::gradcheck::gradcheck;
use super::*;

fn rng(seed: u64) -> crate::seed::Rng {
    crate::seed::Rng::seed_from_u64(seed)
}

fn small_spec() -> EncoderSpec {
    EncoderSpec {
        conv: [ConvLayerSpec::new(4, 8, 4), ConvLayerSpec::new(4, 4, 2), ConvLayerSpec::new(4, 3, 1)],
        latent_dim: 16,
        ..EncoderSpec::default()
    }
}

#[test]
fn relu_clamps_negatives() {
    let store = ParamStore::new();
    let mut g = Graph::new(&store);
    let x = g.constant(Tensor::from_vec(vec![-1.0, 2.0]));
    let y = g.relu(x);
    assert_eq!(g.value(y).data(), &[0.0, 2.0]);
}

#[test]
fn softmax_of_equal_logits_is_uniform() {
    let store = ParamStore::new();
    let mut g = Graph::new(&store);
    let x = g.constant(Tensor::from_vec(vec![0.0; 3]));
    let y = g.softmax(x).unwrap();
    for p in g.value(y).data() {
        assert!((p - 1.0 / 3.0).abs() < 1e-15);
    }
}

#[test]
fn conv_matches_direct_definition() {
    let (h, w, k) = (7usize, 6usize, 3usize);
    let kernel: Vec<f64> = (0..9).map(|i| i as f64 + 1.0).collect();
    let mut img = vec![0.0; h * w];
    img[3 * w + 2] = 1.0;
    let mut store = ParamStore::new();
    let wid = store.add("w", Tensor::new(&[1, 1, k, k], kernel.clone()).unwrap());
    let bid = store.add("b", Tensor::zeros(&[1]));
    let mut g = Graph::new(&store);
    let x = g.constant(Tensor::new(&[1, 1, h, w], img.clone()).unwrap());
    let (wv, bv) = (g.param(wid), g.param(bid));
    let y = g.conv2d(x, wv, bv, 1).unwrap();
    let out = g.value(y);
    assert_eq!(out.shape(), &[1, 1, h - k + 1, w - k + 1]);
    let ow = w - k + 1;
    for oy in 0..h - k + 1 {
        for ox in 0..ow {
            let mut want = 0.0;
            for ky in 0..k {
                for kx in 0..k {
                    want += img[(oy + ky) * w + ox + kx] * kernel[ky * k + kx];
                }
            }
            assert_eq!(out.data()[oy * ow + ox], want);
        }
    }
    // The impulse at (3, 2) meets kernel tap (ky, kx) at output (3 - ky, 2 - kx).
    for ky in 0..k {
        for kx in 0..k {
            assert_eq!(out.data()[(3 - ky) * ow + (2 - kx)], kernel[ky * k + kx]);
        }
    }
}

#[test]
fn shape_errors_name_both_shapes() {
    let store = ParamStore::new();
    let mut g = Graph::new(&store);
    let a = g.constant(Tensor::zeros(&[2, 3]));
    let b = g.constant(Tensor::zeros(&[4, 5]));
    let err = g.matmul(a, b).unwrap_err();
    let msg = err.to_string();
    assert!(msg.contains("[2, 3]") && msg.contains("[4, 5]"), "{msg}");
    assert!(g.add(a, b).is_err());
}

#[test]
fn sum_gradient_is_ones() {
    let mut store = ParamStore::new();
    let w = store.add("w", Tensor::new(&[2, 3], vec![0.5, -1.0, 2.0, 3.0, 0.0, 1.5]).unwrap());
    let mut g = Graph::new(&store);
    let wv = g.param(w);
    let l = g.sum(wv);
    let grads = g.backward(l).unwrap();
    assert_eq!(grads.get(w).unwrap().data(), &[1.0; 6]);
}

#[test]
fn half_squared_norm_gradient_is_identity() {
    let vals = vec![0.5, -1.0, 2.0, 3.0];
    let mut store = ParamStore::new();
    let w = store.add("w", Tensor::from_vec(vals.clone()));
    let mut g = Graph::new(&store);
    let wv = g.param(w);
    let sq = g.square(wv);
    let s = g.sum(sq);
    let l = g.scale(s, 0.5);
    let grads = g.backward(l).unwrap();
    assert_eq!(grads.get(w).unwrap().data(), vals.as_slice());
}

#[test]
fn non_scalar_loss_is_rejected() {
    let mut store = ParamStore::new();
    let w = store.add("w", Tensor::from_vec(vec![1.0, 2.0]));
    let mut g = Graph::new(&store);
    let wv = g.param(w);
    assert_eq!(g.backward(wv).unwrap_err(), NnError::NonScalarLoss(vec![2]));
}

#[test]
fn reused_parameter_accumulates() {
    let mut store = ParamStore::new();
    let w = store.add("w", Tensor::from_vec(vec![3.0]));
    let mut g = Graph::new(&store);
    let a = g.param(w);
    let b = g.param(w);
    let p = g.mul(a, b).unwrap();
    let l = g.sum(p);
    let grads = g.backward(l).unwrap();
    assert_eq!(grads.get(w).unwrap().data(), &[6.0]);
}

#[test]
fn frozen_parameters_get_no_gradient() {
    let mut store = ParamStore::new();
    let w = store.add("w", Tensor::from_vec(vec![1.0]));
    let f = store.add("f", Tensor::from_vec(vec![2.0]));
    store.set_trainable(f, false);
    let mut g = Graph::new(&store);
    let (a, b) = (g.param(w), g.param(f));
    let p = g.mul(a, b).unwrap();
    let l = g.sum(p);
    let grads = g.backward(l).unwrap();
    assert!(grads.get(f).is_none());
    assert_eq!(grads.get(w).unwrap().data(), &[2.0]);
}

#[test]
fn independent_graphs_do_not_interfere() {
    let mut store = ParamStore::new();
    let w = store.add("w", Tensor::from_vec(vec![1.0, -2.0]));
    let mut g1 = Graph::new(&store);
    let mut g2 = Graph::new(&store);
    let a = g1.param(w);
    let l1 = g1.sum(a);
    let b = g2.param(w);
    let sq = g2.square(b);
    let l2 = g2.sum(sq);
    let d2 = g2.backward(l2).unwrap();
    let d1 = g1.backward(l1).unwrap();
    assert_eq!(d1.get(w).unwrap().data(), &[1.0, 1.0]);
    assert_eq!(d2.get(w).unwrap().data(), &[2.0, -4.0]);
}

#[test]
fn adam_converges_on_scalar_quadratic() {
    let mut store = ParamStore::new();
    let w = store.add("w", Tensor::scalar(0.0));
    let mut adam = Adam::new(0.1);
    for _ in 0..500 {
        let mut g = Graph::new(&store);
        let wv = g.param(w);
        let d = g.add_scalar(wv, -3.0);
        let l = g.square(d);
        let grads = g.backward(l).unwrap();
        store.accumulate(&grads);
        adam.step(&mut store).unwrap();
    }
    assert!((store.get(w).item() - 3.0).abs() < 1e-3, "w = {}", store.get(w).item());
}

#[test]
fn adam_zero_gradient_leaves_parameters() {
    let mut store = ParamStore::new();
    let w = store.add("w", Tensor::from_vec(vec![1.5, -0.25]));
    store.fill_missing_grads();
    let mut adam = Adam::new(0.1);
    adam.step(&mut store).unwrap();
    assert_eq!(store.get(w).data(), &[1.5, -0.25]);
    assert_eq!(adam.step_count(), 1);
    assert!(store.grad(w).is_none());
}

#[test]
fn adam_errors_on_missing_gradient_and_counts_steps() {
    let mut store = ParamStore::new();
    store.add("w", Tensor::from_vec(vec![1.0]));
    let mut adam = Adam::new(0.1);
    assert!(matches!(adam.step(&mut store), Err(NnError::MissingGrad(_))));
    assert_eq!(adam.step_count(), 0);
    for n in 1..=3 {
        store.fill_missing_grads();
        adam.step(&mut store).unwrap();
        assert_eq!(adam.step_count(), n);
    }
}

#[test]
fn encoder_output_shape_and_determinism() {
    let spec = small_spec();
    let build = || {
        let mut store = ParamStore::new();
        let enc = Encoder::new(&mut store, "enc", spec, &mut rng(5)).unwrap();
        (store, enc)
    };
    let (s1, e1) = build();
    let (s2, _) = build();
    assert_eq!(s1, s2);
    let img: Vec<u8> = (0..spec.input_len()).map(|i| (i * 7 % 256) as u8).collect();
    let x = pixels_to_tensor(&[img.clone(), img], 84, 84, 3).unwrap();
    let mut g = Graph::new(&s1);
    let xv = g.constant(x);
    let z = e1.forward(&mut g, xv).unwrap();
    assert_eq!(g.shape(z), &[2, 16]);
    assert_eq!(g.value(z).row(0), g.value(z).row(1));
}

#[test]
fn encoder_spec_rejects_bad_shapes() {
    let mut spec = EncoderSpec::default();
    assert_eq!(spec.flat_features().unwrap(), 64 * 7 * 7);
    spec.latent_dim = 0;
    assert!(spec.validate().is_err());
    let mut spec = EncoderSpec::default();
    spec.conv[2].kernel = 12;
    assert!(spec.validate().is_err());
}

#[test]
fn encoder_gradients_match_finite_differences() {
    let spec = EncoderSpec {
        conv: [ConvLayerSpec::new(3, 8, 4), ConvLayerSpec::new(3, 4, 2), ConvLayerSpec::new(3, 3, 1)],
        latent_dim: 6,
        ..EncoderSpec::default()
    };
    let mut store = ParamStore::new();
    let mut r = rng(9);
    let enc = Encoder::new(&mut store, "enc", spec, &mut r).unwrap();
    let head = Linear::new(&mut store, "head", 6, 4, 1.0, &mut r);
    let img: Vec<u8> = (0..spec.input_len()).map(|i| ((i * 31 + 7) % 256) as u8).collect();
    let x = pixels_to_tensor(&[img], 84, 84, 3).unwrap();
    let report = gradcheck(&store, 100, 1, |g| {
        let xv = g.constant(x.clone());
        let z = enc.forward(g, xv)?;
        let logits = head.forward(g, z)?;
        let lp = g.log_softmax(logits)?;
        let picked = g.gather(lp, &[2])?;
        let m = g.mean(picked);
        Ok(g.scale(m, -1.0))
    })
    .unwrap();
    assert_eq!(report.checked, 100);
    assert!(report.max_rel_error < 1e-4, "{report:?}");
}

#[test]
fn elementwise_ops_match_finite_differences() {
    let mut store = ParamStore::new();
    let a = store.add("a", Tensor::new(&[3, 4], (0..12).map(|i| 0.3 + 0.1 * i as f64).collect()).unwrap());
    let b = store.add("b", Tensor::new(&[4, 2], (0..8).map(|i| (i as f64 * 0.7).sin()).collect()).unwrap());
    let c = store.add("c", Tensor::new(&[3, 2], (0..6).map(|i| (i as f64 * 1.3).cos()).collect()).unwrap());
    let report = gradcheck(&store, 100, 2, |g| {
        let (av, bv, cv) = (g.param(a), g.param(b), g.param(c));
        let ab = g.matmul(av, bv)?;
        let cat = g.concat_cols(&[ab, cv])?;
        let t = g.transpose(cat)?;
        let e = g.exp(t);
        let lg = g.log(e);
        let cl = g.clamp(lg, -0.5, 0.9);
        let tt = g.transpose(cl)?;
        let m = g.minimum(tt, cat)?;
        let sm = g.softmax(m)?;
        let n = g.row_l2_norm(sm)?;
        let rows = g.sum_rows(cat)?;
        let prod = g.mul(n, rows)?;
        Ok(g.sum(prod))
    })
    .unwrap();
    assert!(report.max_rel_error < 1e-4, "{report:?}");
}

#[test]
fn checkpoint_round_trips_bit_exactly() {
    let spec = small_spec();
    let mut store = ParamStore::new();
    let enc = Encoder::new(&mut store, "enc", spec, &mut rng(4)).unwrap();
    store.fill_missing_grads();
    let mut adam = Adam::new(1e-3);
    for id in store.ids().collect::<Vec<_>>() {
        store.get_mut(id).data_mut().iter_mut().for_each(|v| *v += 1e-17);
    }
    adam.step(&mut store).unwrap();
    let ck = EncoderCheckpoint::capture(&store, &enc, 42, "run-a").with_optimizer(&adam, &enc);
    let bytes = ck.to_bytes().unwrap();
    let back = EncoderCheckpoint::from_bytes(&bytes).unwrap();
    assert_eq!(back, ck);
    assert_eq!(back.to_bytes().unwrap(), bytes);

    let mut other = ParamStore::new();
    let enc2 = Encoder::new(&mut other, "enc", spec, &mut rng(99)).unwrap();
    back.apply(&mut other, &enc2).unwrap();
    assert_eq!(EncoderCheckpoint::capture(&other, &enc2, 42, "run-a").weight_blob(), ck.weight_blob());
}

#[test]
fn checkpoint_rejects_corruption_and_spec_mismatch() {
    let spec = small_spec();
    let mut store = ParamStore::new();
    let enc = Encoder::new(&mut store, "enc", spec, &mut rng(4)).unwrap();
    let bytes = EncoderCheckpoint::capture(&store, &enc, 0, "x").to_bytes().unwrap();
    let mut flipped = bytes.clone();
    flipped[40] ^= 1;
    assert!(EncoderCheckpoint::from_bytes(&flipped).is_err());
    assert!(EncoderCheckpoint::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    assert!(EncoderCheckpoint::from_bytes(&[]).is_err());

    let mut other_spec = spec;
    other_spec.latent_dim = 8;
    let mut s2 = ParamStore::new();
    let e2 = Encoder::new(&mut s2, "enc", other_spec, &mut rng(1)).unwrap();
    let ck = EncoderCheckpoint::from_bytes(&bytes).unwrap();
    assert!(ck.apply(&mut s2, &e2).is_err());
}

#[test]
fn categorical_sampling_follows_probabilities() {
    let probs = [0.1, 0.6, 0.3];
    let mut r = rng(7);
    let mut counts = [0usize; 3];
    let n = 30_000;
    for _ in 0..n {
        counts[sample_categorical(&probs, &mut r)] += 1;
    }
    for (c, p) in counts.iter().zip(probs) {
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((*c as f64 - n as f64 * p).abs() < 4.0 * sd);
    }
}
