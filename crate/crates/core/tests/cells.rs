use onfire_core::arch::{nasnet, shufflenet};
use onfire_core::graph::{Graph, GraphBuilder, ParamRole};
use onfire_core::ops::{self, PoolParams};
use onfire_core::{BatchNormParams, ConvParams, Tensor, WeightStore};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_tensor(dims: [usize; 4], seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(dims, |_, _, _, _| rng.gen_range(-1.0..1.0))
}

/// Random weights with non-trivial batch-norm statistics.
fn random_store(g: &Graph, seed: u64) -> WeightStore {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    WeightStore::for_graph(g, |d| {
        Tensor::from_fn(d.dims, |_, _, _, _| match d.role {
            ParamRole::BnRunningVar => rng.gen_range(0.5..1.5),
            ParamRole::BnGamma => rng.gen_range(0.5..1.5),
            _ => rng.gen_range(-0.5..0.5),
        })
    })
}

fn single_cell(shape: [usize; 3], build: impl FnOnce(&mut GraphBuilder, usize) -> usize) -> Graph {
    let mut b = GraphBuilder::new("cell", vec![shape]);
    let x = b.input(0);
    let y = build(&mut b, x);
    b.set_output("out", y);
    b.finish()
}

fn run(g: &Graph, w: &WeightStore, x: &Tensor) -> Tensor {
    g.execute(w, &[x], &[g.output("out").unwrap()]).unwrap().remove(0)
}

struct Oracle<'a> {
    w: &'a WeightStore,
}

impl Oracle<'_> {
    fn conv(&self, x: &Tensor, name: &str, k: usize, s: usize, groups: usize) -> Tensor {
        let p = ConvParams::new(k, s, k / 2).with_groups(groups);
        ops::conv2d(x, self.w.get(&format!("{name}.weight")).unwrap(), p).unwrap()
    }

    fn bn(&self, x: &Tensor, prefix: &str, eps: f32) -> Tensor {
        let v = |s: &str| self.w.get(&format!("{prefix}.{s}")).unwrap().data().to_vec();
        let p = BatchNormParams {
            gamma: v("gamma"),
            beta: v("beta"),
            mean: v("running_mean"),
            var: v("running_var"),
            eps,
        };
        ops::batch_norm_infer(x, &p).unwrap()
    }

    fn shuffle_unit(&self, x: &Tensor, name: &str, dw: bool, stride: usize, relu: bool) -> Tensor {
        let c = x.channels();
        let y = if dw {
            self.conv(x, &format!("{name}.conv"), 3, stride, c)
        } else {
            self.conv(x, &format!("{name}.conv"), 1, 1, 1)
        };
        let y = self.bn(&y, &format!("{name}.bn"), 1e-5);
        if relu {
            ops::relu(&y)
        } else {
            y
        }
    }
}

#[test]
fn shufflenet_normal_cell_shape_and_oracle() {
    let g = single_cell([48, 28, 28], |b, x| shufflenet::normal_cell(b, x, "c"));
    let w = random_store(&g, 1);
    let x = random_tensor([2, 48, 28, 28], 2);
    let y = run(&g, &w, &x);
    assert_eq!(y.dims(), x.dims());

    let o = Oracle { w: &w };
    let (l, r) = ops::channel_split(&x, 24).unwrap();
    let r = o.shuffle_unit(&r, "c.branch2.pw1", false, 1, true);
    let r = o.shuffle_unit(&r, "c.branch2.dw", true, 1, false);
    let r = o.shuffle_unit(&r, "c.branch2.pw2", false, 1, true);
    let expected = ops::channel_shuffle(&ops::concat_channels(&[&l, &r]).unwrap(), 2).unwrap();
    assert_eq!(y, expected);
}

#[test]
fn shufflenet_normal_cell_zero_branch_passes_left_half() {
    let g = single_cell([8, 5, 5], |b, x| shufflenet::normal_cell(b, x, "c"));
    let w = WeightStore::for_graph(&g, |d| match d.role {
        ParamRole::ConvWeight => Tensor::zeros(d.dims),
        ParamRole::BnGamma | ParamRole::BnRunningVar => Tensor::full(d.dims, 1.0),
        _ => Tensor::zeros(d.dims),
    });
    let x = random_tensor([1, 8, 5, 5], 3);
    let y = run(&g, &w, &x);
    for i in 0..8 {
        let j = ops::shuffled_position(i, 8, 2);
        if i < 4 {
            assert_eq!(y.plane(0, j), x.plane(0, i));
        } else {
            assert!(y.plane(0, j).iter().all(|v| *v == 0.0));
        }
    }
}

#[test]
fn shufflenet_reduction_cell_shapes_and_oracle() {
    for (cin, hw, cout) in [(24, 56, 48), (48, 28, 96)] {
        let g = single_cell([cin, hw, hw], |b, x| shufflenet::reduction_cell(b, x, "r", cout));
        assert_eq!(g.shape(g.output("out").unwrap()), [cout, hw / 2, hw / 2]);
    }
    let g = single_cell([24, 14, 14], |b, x| shufflenet::reduction_cell(b, x, "r", 48));
    let w = random_store(&g, 4);
    let x = random_tensor([1, 24, 14, 14], 5);
    let y = run(&g, &w, &x);
    let o = Oracle { w: &w };
    let l = o.shuffle_unit(&x, "r.branch1.dw", true, 2, false);
    let l = o.shuffle_unit(&l, "r.branch1.pw", false, 1, true);
    let r = o.shuffle_unit(&x, "r.branch2.pw1", false, 1, true);
    let r = o.shuffle_unit(&r, "r.branch2.dw", true, 2, false);
    let r = o.shuffle_unit(&r, "r.branch2.pw2", false, 1, true);
    let expected = ops::channel_shuffle(&ops::concat_channels(&[&l, &r]).unwrap(), 2).unwrap();
    assert_eq!(y, expected);
}

fn sep_oracle(o: &Oracle, x: &Tensor, name: &str, k: usize, s: usize) -> Tensor {
    let c = x.channels();
    let y = ops::relu(x);
    let y = o.conv(&y, &format!("{name}.dw1"), k, s, c);
    let y = o.conv(&y, &format!("{name}.pw1"), 1, 1, 1);
    let y = ops::relu(&o.bn(&y, &format!("{name}.bn1"), 1e-3));
    let c2 = y.channels();
    let y = o.conv(&y, &format!("{name}.dw2"), k, 1, c2);
    let y = o.conv(&y, &format!("{name}.pw2"), 1, 1, 1);
    o.bn(&y, &format!("{name}.bn2"), 1e-3)
}

fn adjust_oracle(o: &Oracle, x: &Tensor, name: &str) -> Tensor {
    let y = o.conv(&ops::relu(x), &format!("{name}.conv"), 1, 1, 1);
    o.bn(&y, &format!("{name}.bn"), 1e-3)
}

fn add(a: &Tensor, b: &Tensor) -> Tensor {
    ops::add(&[a, b]).unwrap()
}

fn close(a: &Tensor, b: &Tensor, tol: f32) {
    assert_eq!(a.dims(), b.dims());
    let scale = b.data().iter().fold(1.0f32, |m, v| m.max(v.abs()));
    assert!(a.max_abs_diff(b) <= tol * scale, "diff {}", a.max_abs_diff(b));
}

#[test]
fn nasnet_normal_cell_oracle() {
    let f = 8;
    let mut b = GraphBuilder::new("n", vec![[24, 10, 10], [16, 10, 10]]);
    let h = b.input(0);
    let hp = b.input(1);
    let y = nasnet::normal_cell(&mut b, h, hp, "n", f);
    b.set_output("out", y);
    let g = b.finish();
    assert_eq!(g.shape(y), [6 * f, 10, 10]);
    let w = random_store(&g, 6);
    let xh = random_tensor([1, 24, 10, 10], 7);
    let xp = random_tensor([1, 16, 10, 10], 8);
    let got = g.execute(&w, &[&xh, &xp], &[y]).unwrap().remove(0);

    let o = Oracle { w: &w };
    let r = adjust_oracle(&o, &xh, "n.conv_1x1");
    let l = adjust_oracle(&o, &xp, "n.conv_prev_1x1");
    let avg = |t: &Tensor| ops::avg_pool2d(t, PoolParams::new(3, 1, 1)).unwrap();
    let i0 = add(
        &sep_oracle(&o, &r, "n.comb_iter_0_left", 5, 1),
        &sep_oracle(&o, &l, "n.comb_iter_0_right", 3, 1),
    );
    let i1 = add(
        &sep_oracle(&o, &l, "n.comb_iter_1_left", 5, 1),
        &sep_oracle(&o, &l, "n.comb_iter_1_right", 3, 1),
    );
    let i2 = add(&avg(&r), &l);
    let i3 = add(&avg(&l), &avg(&l));
    let i4 = add(&sep_oracle(&o, &r, "n.comb_iter_4_left", 3, 1), &r);
    let expected = ops::concat_channels(&[&l, &i0, &i1, &i2, &i3, &i4]).unwrap();
    close(&got, &expected, 1e-6);
}

#[test]
fn nasnet_normal_cell_factorizes_larger_prev() {
    let f = 8;
    let mut b = GraphBuilder::new("n", vec![[24, 7, 7], [16, 14, 14]]);
    let h = b.input(0);
    let hp = b.input(1);
    let y = nasnet::normal_cell(&mut b, h, hp, "n", f);
    b.set_output("out", y);
    let g = b.finish();
    assert_eq!(g.shape(y), [6 * f, 7, 7]);
    let w = random_store(&g, 9);
    let xh = random_tensor([1, 24, 7, 7], 10);
    let xp = random_tensor([1, 16, 14, 14], 11);
    let l_node = g.find("n.final_path_bn").unwrap();
    let got = g.execute(&w, &[&xh, &xp], &[l_node]).unwrap().remove(0);

    let o = Oracle { w: &w };
    let relu = ops::relu(&xp);
    let one = |t: &Tensor, name: &str| {
        ops::conv2d(t, w.get(&format!("{name}.weight")).unwrap(), ConvParams::new(1, 2, 0)).unwrap()
    };
    let p1 = one(&relu, "n.path_1.conv");
    let p2 = one(&ops::shift_crop(&relu), "n.path_2.conv");
    let expected = o.bn(&ops::concat_channels(&[&p1, &p2]).unwrap(), "n.final_path_bn", 1e-3);
    close(&got, &expected, 1e-6);
}

#[test]
fn nasnet_reduction_cell_oracle() {
    let f = 8;
    let mut b = GraphBuilder::new("r", vec![[20, 12, 12], [20, 12, 12]]);
    let h = b.input(0);
    let hp = b.input(1);
    let y = nasnet::reduction_cell(&mut b, h, hp, "r", f);
    b.set_output("out", y);
    let g = b.finish();
    assert_eq!(g.shape(y), [4 * f, 6, 6]);
    let census = g.separable_census(&g.cells()[0]);
    assert_eq!((census.count(3), census.count(5), census.count(7)), (1, 2, 2));

    let w = random_store(&g, 12);
    let xh = random_tensor([1, 20, 12, 12], 13);
    let xp = random_tensor([1, 20, 12, 12], 14);
    let got = g.execute(&w, &[&xh, &xp], &[y]).unwrap().remove(0);

    let o = Oracle { w: &w };
    let c = adjust_oracle(&o, &xh, "r.conv_1x1");
    let p = adjust_oracle(&o, &xp, "r.conv_prev_1x1");
    let max2 = |t: &Tensor| ops::max_pool2d(t, PoolParams::new(3, 2, 1)).unwrap();
    let avg2 = |t: &Tensor| ops::avg_pool2d(t, PoolParams::new(3, 2, 1)).unwrap();
    let avg1 = |t: &Tensor| ops::avg_pool2d(t, PoolParams::new(3, 1, 1)).unwrap();
    let i0 = add(
        &sep_oracle(&o, &c, "r.comb_iter_0_left", 5, 2),
        &sep_oracle(&o, &p, "r.comb_iter_0_right", 7, 2),
    );
    let i1 = add(&max2(&c), &sep_oracle(&o, &p, "r.comb_iter_1_right", 7, 2));
    let i2 = add(&avg2(&c), &sep_oracle(&o, &p, "r.comb_iter_2_right", 5, 2));
    let i3 = add(&avg1(&i0), &i1);
    let i4 = add(&sep_oracle(&o, &i0, "r.comb_iter_4_left", 3, 1), &max2(&c));
    let expected = ops::concat_channels(&[&i1, &i2, &i3, &i4]).unwrap();
    close(&got, &expected, 1e-6);
}
