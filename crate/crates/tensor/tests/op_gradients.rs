use crepair_tensor::{
    check_gradients, Array2, AttnSegment, AttnSpec, Gradients, Graph, ParamStore, Var,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const EPS: f64 = 1e-5;
const TOL: f64 = 1e-6;

fn store_with(shapes: &[(&str, usize, usize)], seed: u64) -> ParamStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = ParamStore::new();
    for &(name, r, c) in shapes {
        store.insert_normal(name, r, c, 0.7, &mut rng);
    }
    store
}

/// Runs `build` once for analytic gradients, then checks every parameter
/// against central differences.
fn assert_gradients<F>(mut store: ParamStore, build: F)
where
    F: Fn(&mut Graph) -> Var,
{
    let analytic: Gradients = {
        let mut g = Graph::new(&store);
        let out = build(&mut g);
        g.backward(out)
    };
    let report = check_gradients(&mut store, &analytic, EPS, |s| {
        let mut g = Graph::new(s);
        let out = build(&mut g);
        g.scalar(out)
    });
    for t in &report.tensors {
        assert!(
            t.max_rel_err < TOL,
            "{}: rel err {} (abs {})",
            t.name,
            t.max_rel_err,
            t.max_abs_err
        );
    }
}

fn weighted_sum(g: &mut Graph, x: Var, seed: u64) -> Var {
    // a fixed random weighting keeps every output element in the loss
    let (r, c) = g.shape(x);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = ParamStore::new();
    w.insert_normal("w", r, c, 1.0, &mut rng);
    let weights = w.get(w.id("w").unwrap()).clone();
    let y = g.mul_const(x, weights);
    g.sum_all(y)
}

#[test]
fn matmul_and_transpose() {
    let store = store_with(&[("a", 3, 4), ("b", 4, 2), ("c", 5, 4)], 1);
    assert_gradients(store, |g| {
        let p = g.params();
        let a = g.param(p.id("a").unwrap());
        let b = g.param(p.id("b").unwrap());
        let c = g.param(p.id("c").unwrap());
        let ab = g.matmul(a, b);
        let act = g.matmul_t(a, c);
        let t = g.transpose(act);
        let s1 = weighted_sum(g, ab, 10);
        let s2 = weighted_sum(g, t, 11);
        g.add(s1, s2)
    });
}

#[test]
fn elementwise_chain() {
    let store = store_with(&[("x", 3, 5), ("y", 3, 5), ("row", 1, 5)], 2);
    assert_gradients(store, |g| {
        let p = g.params();
        let x = g.param(p.id("x").unwrap());
        let y = g.param(p.id("y").unwrap());
        let row = g.param(p.id("row").unwrap());
        let a = g.add_row(x, row);
        let b = g.mul(a, y);
        let c = g.tanh(b);
        let d = g.sigmoid(c);
        let e = g.gelu(d);
        let f = g.sub(e, x);
        let h = g.scale(f, 0.3);
        let k = g.one_minus(h);
        weighted_sum(g, k, 3)
    });
}

#[test]
fn softmax_log_and_gather() {
    let store = store_with(&[("x", 4, 6)], 3);
    assert_gradients(store, |g| {
        let p = g.params();
        let x = g.param(p.id("x").unwrap());
        let sm = g.softmax_rows(x);
        let picked = g.gather_per_row(sm, &[Some(1), None, Some(5), Some(0)]);
        let shifted = g.add_scalar(picked, 0.5);
        let logs = g.ln(shifted);
        let ls = g.log_softmax_rows(x);
        let s1 = g.sum_all(logs);
        let s2 = weighted_sum(g, ls, 4);
        g.add(s1, s2)
    });
}

#[test]
fn masked_softmax() {
    let store = store_with(&[("x", 3, 4)], 4);
    let mask = Array2::from_shape_fn((3, 4), |(i, j)| j <= i + 1);
    assert_gradients(store, move |g| {
        let p = g.params();
        let x = g.param(p.id("x").unwrap());
        let sm = g.masked_softmax_rows(x, &mask);
        weighted_sum(g, sm, 5)
    });
}

#[test]
fn layer_norm_embedding_rows() {
    let store = store_with(
        &[("table", 7, 4), ("gamma", 1, 4), ("beta", 1, 4), ("x", 3, 4)],
        5,
    );
    assert_gradients(store, |g| {
        let p = g.params();
        let table = g.param(p.id("table").unwrap());
        let gamma = g.param(p.id("gamma").unwrap());
        let beta = g.param(p.id("beta").unwrap());
        let x = g.param(p.id("x").unwrap());
        let e = g.embedding(table, &[3, 1, 3, 6]);
        let cat = g.concat_rows(&[e, x]);
        let ln = g.layer_norm(cat, gamma, beta, 1e-5);
        let sel = g.select_rows(ln, &[0, 4, 2, 2]);
        let sl = g.slice_rows(ln, 1, 3);
        let cc = g.concat_cols(&[sl, x]);
        let sr = g.sum_rows(cc);
        let s1 = weighted_sum(g, sel, 6);
        let s2 = weighted_sum(g, sr, 7);
        let m = g.mean_all(cc);
        let s12 = g.add(s1, s2);
        g.add(s12, m)
    });
}

#[test]
fn segmented_multi_head_attention() {
    let store = store_with(&[("q", 7, 6), ("k", 9, 6), ("v", 9, 6)], 6);
    let spec = AttnSpec {
        heads: 2,
        segments: vec![
            AttnSegment {
                q_start: 0,
                q_len: 3,
                k_start: 0,
                k_len: 4,
            },
            AttnSegment {
                q_start: 3,
                q_len: 4,
                k_start: 4,
                k_len: 5,
            },
        ],
        causal: false,
        key_mask: Some(vec![true, true, false, true, true, true, true, false, true]),
    };
    assert_gradients(store, move |g| {
        let p = g.params();
        let q = g.param(p.id("q").unwrap());
        let k = g.param(p.id("k").unwrap());
        let v = g.param(p.id("v").unwrap());
        let out = g.attention(q, k, v, spec.clone());
        weighted_sum(g, out, 8)
    });
}

#[test]
fn causal_self_attention() {
    let store = store_with(&[("x", 5, 4)], 7);
    assert_gradients(store, |g| {
        let p = g.params();
        let x = g.param(p.id("x").unwrap());
        let spec = AttnSpec {
            heads: 1,
            segments: vec![AttnSegment::square(0, 5)],
            causal: true,
            key_mask: None,
        };
        let out = g.attention(x, x, x, spec);
        weighted_sum(g, out, 9)
    });
}

#[test]
fn causal_attention_ignores_future_rows() {
    let store = store_with(&[("x", 4, 4)], 8);
    let spec = AttnSpec {
        heads: 2,
        segments: vec![AttnSegment::square(0, 4)],
        causal: true,
        key_mask: None,
    };
    let mut g = Graph::new(&store);
    let x = g.param(store.id("x").unwrap());
    let out = g.attention(x, x, x, spec.clone());
    let first = g.value(out).row(0).to_owned();
    let probs = g.attention_probs(out).unwrap();
    for p in probs {
        for i in 0..4 {
            for j in (i + 1)..4 {
                assert_eq!(p[[i, j]], 0.0);
            }
            assert!((p.row(i).sum() - 1.0).abs() < 1e-12);
        }
    }

    let mut changed = store.clone();
    let id = changed.id("x").unwrap();
    changed.get_mut(id)[[3, 0]] += 5.0;
    let mut g2 = Graph::new(&changed);
    let x2 = g2.param(id);
    let out2 = g2.attention(x2, x2, x2, spec);
    assert_eq!(g2.value(out2).row(0), first);
}
