use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sct_core::nn::{AdamConfig, GatherPlan, Group, Init, ParamStore, Tape, Tensor};

fn t(rows: usize, cols: usize, v: &[f64]) -> Tensor<f64> {
    Tensor::from_f64(rows, cols, v)
}

fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Central-difference check of `f` with respect to every entry of `x`.
fn fd_check(x: &Tensor<f64>, f: impl Fn(&mut Tape<f64>, usize) -> usize) {
    let mut tape = Tape::new();
    let v = tape.variable(x.clone());
    let out = f(&mut tape, v);
    tape.backward(out);
    let g = tape.grad(v);
    let h = 1e-6;
    for i in 0..x.data.len() {
        let eval = |d: f64| {
            let mut xp = x.clone();
            xp.data[i] += d;
            let mut tp = Tape::new();
            let vp = tp.input(xp);
            let o = f(&mut tp, vp);
            tp.value(o).data[0]
        };
        let fd = (eval(h) - eval(-h)) / (2.0 * h);
        let a = g.data[i];
        let tol = 1e-4 * a.abs().max(fd.abs()).max(1e-6);
        assert!((a - fd).abs() <= tol, "entry {i}: analytic {a}, fd {fd}");
    }
}

#[test]
fn linear_identity_and_zero_weights() {
    let mut tape = Tape::new();
    let x = tape.input(t(1, 3, &[1.0, -2.0, 3.0]));
    let eye = tape.input(t(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]));
    let zb = tape.input(t(1, 3, &[0.0; 3]));
    let y = tape.linear(x, eye, Some(zb));
    assert_eq!(tape.value(y).data, vec![1.0, -2.0, 3.0]);
    let zw = tape.input(t(3, 2, &[0.0; 6]));
    let b = tape.input(t(1, 2, &[0.5, -0.25]));
    let y = tape.linear(x, zw, Some(b));
    assert_eq!(tape.value(y).data, vec![0.5, -0.25]);
}

#[test]
fn linear_matches_hand_product() {
    // x = [1, 2, 3], W rows = inputs
    let mut tape = Tape::new();
    let x = tape.input(t(1, 3, &[1.0, 2.0, 3.0]));
    let w = tape.input(t(3, 3, &[0.5, -1.0, 2.0, 1.5, 0.0, -0.5, -2.0, 1.0, 0.25]));
    let b = tape.input(t(1, 3, &[0.1, 0.2, 0.3]));
    let y = tape.linear(x, w, Some(b));
    // column j: Σ_i x_i W_ij + b_j
    let want = [0.5 + 3.0 - 6.0 + 0.1, -1.0 + 0.0 + 3.0 + 0.2, 2.0 - 1.0 + 0.75 + 0.3];
    for (a, e) in tape.value(y).data.iter().zip(want) {
        assert!((a - e).abs() < 1e-12);
    }
}

#[test]
fn relu_values_and_gradient() {
    let mut tape = Tape::new();
    let x = tape.variable(t(1, 2, &[-1.0, 2.0]));
    let y = tape.relu(x);
    assert_eq!(tape.value(y).data, vec![0.0, 2.0]);
    let s = tape.sum(y);
    tape.backward(s);
    assert_eq!(tape.grad(x).data, vec![0.0, 1.0]);
    fd_check(&t(1, 4, &[-0.7, 0.3, 1.2, -0.1]), |tp, v| {
        let r = tp.relu(v);
        let sq = tp.mul(r, r);
        tp.sum(sq)
    });
}

#[test]
fn softmax_examples() {
    let mut tape: Tape<f64> = Tape::new();
    let a = tape.input(t(1, 2, &[0.0, 0.0]));
    let s = tape.softmax(a);
    assert_eq!(tape.value(s).data, vec![0.5, 0.5]);
    let b = tape.input(t(1, 2, &[0.0, 3f64.ln()]));
    let s = tape.softmax(b);
    let v = &tape.value(s).data;
    assert!((v[0] - 0.25).abs() < 1e-15 && (v[1] - 0.75).abs() < 1e-15);
    let c = tape.input(t(1, 3, &[0.3, -1.2, 2.0]));
    let d = tape.input(t(1, 3, &[100.3, 98.8, 102.0]));
    let (sc, sd) = (tape.softmax(c), tape.softmax(d));
    for (x, y) in tape.value(sc).data.iter().zip(&tape.value(sd).data) {
        assert!((x - y).abs() < 1e-14);
    }
}

#[test]
fn square_derivative_and_constant() {
    let mut tape = Tape::new();
    let x = tape.variable(t(1, 1, &[3.0]));
    let y = tape.mul(x, x);
    tape.backward(y);
    assert_eq!(tape.grad(x).data, vec![6.0]);

    let mut tape = Tape::new();
    let x = tape.variable(t(1, 1, &[3.0]));
    let c = tape.input(t(1, 1, &[5.0]));
    let z = tape.scale(c, 2.0);
    tape.backward(z);
    assert_eq!(tape.grad(x).data, vec![0.0]);
}

#[test]
fn every_op_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = t(2, 3, &rand_vec(&mut rng, 6));
    let w = t(3, 4, &rand_vec(&mut rng, 12));
    let b = t(1, 4, &rand_vec(&mut rng, 4));
    let wts = rand_vec(&mut rng, 8);
    // linear + relu + softmax + weighted CE
    fd_check(&x, |tp, v| {
        let (wi, bi) = (tp.input(w.clone()), tp.input(b.clone()));
        let h = tp.linear(v, wi, Some(bi));
        let r = tp.relu(h);
        let s = tp.softmax(r);
        let m = tp.mul(s, s);
        let ce = tp.weighted_ce(h, &[1, 3], &[0.7, 0.2]);
        let sm = tp.sum(m);
        tp.add(sm, ce)
    });
    // gradient with respect to the weights
    fd_check(&w, |tp, v| {
        let xi = tp.input(x.clone());
        let h = tp.linear(xi, v, None);
        tp.weighted_ce(h, &[0, 2], &[1.0, 0.01])
    });
    // concat, scale, gather
    fd_check(&x, |tp, v| {
        let s = tp.scale(v, -1.7);
        let c = tp.concat(&[v, s]);
        let mut pb = GatherPlan::builder(3, 2, 2);
        let mut k = 0;
        for _ in 0..3 {
            for _ in 0..2 {
                pb.push(k % 2, wts[k]);
                if k % 3 == 0 {
                    pb.push((k + 1) % 2, wts[k + 1]);
                }
                pb.next_slot();
                k += 1;
            }
        }
        let gth = tp.gather(c, Arc::new(pb.finish()));
        let q = tp.mul(gth, gth);
        tp.sum(q)
    });
    // stack
    fd_check(&x, |tp, v| {
        let s = tp.scale(v, 0.5);
        let st = tp.stack(&[v, s, v]);
        let q = tp.mul(st, st);
        tp.sum(q)
    });
    // smoothmax
    fd_check(&x, |tp, v| {
        let e = tp.smoothmax(v, 10.0, 0.5);
        let q = tp.mul(e, e);
        tp.sum(q)
    });
}

#[test]
fn weighted_ce_gradient_is_softmax_minus_onehot() {
    let logits = [0.2, -0.4, 1.1, 0.0];
    let mut tape = Tape::new();
    let l = tape.variable(t(1, 4, &logits));
    let ce = tape.weighted_ce(l, &[2], &[0.3]);
    tape.backward(ce);
    let mut tp2: Tape<f64> = Tape::new();
    let l2 = tp2.input(t(1, 4, &logits));
    let s = tp2.softmax(l2);
    let p = tp2.value(s).data.clone();
    assert!((tape.value(ce).data[0] - 0.3 * -p[2].ln()).abs() < 1e-12);
    for (q, g) in tape.grad(l).data.iter().enumerate() {
        let want = 0.3 * (p[q] - if q == 2 { 1.0 } else { 0.0 });
        assert!((g - want).abs() < 1e-12);
    }
}

#[test]
fn adam_first_step_is_lr() {
    let cfg = AdamConfig {
        lr: 1e-3,
        ..AdamConfig::default()
    };
    let (mut th, mut m, mut v) = ([0.0f64], [0.0], [0.0]);
    cfg.update(1, &mut th, &mut m, &mut v, &[1.0]);
    assert!((th[0] + 1e-3).abs() < 1e-10);
}

#[test]
fn adam_zero_gradient_is_a_no_op() {
    let cfg = AdamConfig::default();
    let (mut th, mut m, mut v) = ([0.7f64, -2.0], [0.0, 0.0], [0.0, 0.0]);
    for t in 1..5 {
        cfg.update(t, &mut th, &mut m, &mut v, &[0.0, 0.0]);
    }
    assert_eq!(th, [0.7, -2.0]);
}

#[test]
fn adam_two_steps_by_hand() {
    let cfg = AdamConfig {
        lr: 0.1,
        weight_decay: 0.01,
        ..AdamConfig::default()
    };
    let (mut th, mut m, mut v) = ([1.0f64], [0.0], [0.0]);
    cfg.update(1, &mut th, &mut m, &mut v, &[2.0]);
    cfg.update(2, &mut th, &mut m, &mut v, &[-1.0]);
    // step 1: m=0.2 v=0.004, m̂=2 v̂=4 -> θ = 1 - 0.001 - 0.1·2/(2+1e-8)
    let mut e = 1.0 - 0.1 * 0.01 * 1.0;
    e -= 0.1 * 2.0 / (2.0 + 1e-8);
    // step 2: m = 0.18 - 0.1 = 0.08, v = 0.003996 + 0.001 = 0.004996
    let (m2, v2) = (0.9 * 0.2 + 0.1 * -1.0, 0.999 * 0.004 + 0.001 * 1.0);
    let (mh, vh) = (m2 / (1.0 - 0.81), v2 / (1.0 - 0.999f64.powi(2)));
    e -= 0.1 * 0.01 * e;
    e -= 0.1 * mh / (vh.sqrt() + 1e-8);
    assert!((th[0] - e).abs() < 1e-12, "{} vs {e}", th[0]);
}

fn toy_net(store: &ParamStore<f64>, x: &Tensor<f64>, tape: &mut Tape<f64>) -> usize {
    let xi = tape.input(x.clone());
    let p: Vec<usize> = (0..4).map(|i| tape.param(store, sct_core::nn::ParamId(i), true)).collect();
    let h = tape.linear(xi, p[0], Some(p[1]));
    let h = tape.relu(h);
    let o = tape.linear(h, p[2], Some(p[3]));
    tape.weighted_ce(o, &[1, 0, 2], &[1.0, 0.5, 0.01])
}

fn toy_store(seed: u64) -> ParamStore<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = ParamStore::new();
    s.add("w0", Group::Decoder, 4, 8, Init::He { fan_in: 4, gain: 1.0 }, &mut rng);
    s.add("b0", Group::Decoder, 1, 8, Init::He { fan_in: 8, gain: 0.1 }, &mut rng);
    s.add("w1", Group::Decoder, 8, 3, Init::He { fan_in: 8, gain: 1.0 }, &mut rng);
    s.add("b1", Group::Decoder, 1, 3, Init::Zeros, &mut rng);
    s
}

#[test]
fn two_layer_net_parameter_gradients() {
    let store = toy_store(1);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = t(3, 4, &rand_vec(&mut rng, 12));
    let mut tape = Tape::new();
    let out = toy_net(&store, &x, &mut tape);
    tape.backward(out);
    let grads = tape.param_grads(&store);
    let h = 1e-6;
    for (bi, g) in grads.iter().enumerate() {
        for i in 0..g.len() {
            let eval = |d: f64| {
                let mut s = store.clone();
                s.blocks_mut()[bi].data[i] += d;
                let mut tp = Tape::new();
                let o = toy_net(&s, &x, &mut tp);
                tp.value(o).data[0]
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            let tol = 1e-4 * g[i].abs().max(fd.abs()).max(1e-6);
            assert!((g[i] - fd).abs() <= tol, "block {bi} entry {i}: {} vs {fd}", g[i]);
        }
    }
}

#[test]
fn training_is_bit_reproducible() {
    let run = || {
        let mut store = toy_store(9).cast::<f32>();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cfg = AdamConfig {
            lr: 1e-2,
            weight_decay: 1e-5,
            ..AdamConfig::default()
        };
        for _ in 0..100 {
            let x = Tensor::<f32>::from_f64(3, 4, &rand_vec(&mut rng, 12));
            let mut tape = Tape::new();
            let xi = tape.input(x);
            let p: Vec<usize> = (0..4).map(|i| tape.param(&store, sct_core::nn::ParamId(i), true)).collect();
            let h = tape.linear(xi, p[0], Some(p[1]));
            let h = tape.relu(h);
            let o = tape.linear(h, p[2], Some(p[3]));
            let l = tape.weighted_ce(o, &[1, 0, 2], &[1.0, 1.0, 1.0]);
            tape.backward(l);
            let g = tape.param_grads(&store);
            store.adam_step(&g, &cfg, |_| true).unwrap();
        }
        store.flat_values()
    };
    let (a, b) = (run(), run());
    assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
}

#[test]
fn frozen_groups_do_not_move() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut s: ParamStore<f64> = ParamStore::new();
    s.add("enc", Group::Camera, 2, 2, Init::He { fan_in: 2, gain: 1.0 }, &mut rng);
    s.add("dec", Group::Decoder, 2, 2, Init::He { fan_in: 2, gain: 1.0 }, &mut rng);
    let before = s.group_values(Group::Camera);
    let g = vec![vec![1.0; 4], vec![1.0; 4]];
    s.adam_step(&g, &AdamConfig::default(), |g| !g.is_encoder()).unwrap();
    assert_eq!(s.group_values(Group::Camera), before);
    assert!(s.adam_step(&[vec![1.0; 4]], &AdamConfig::default(), |_| true).is_err());
}
