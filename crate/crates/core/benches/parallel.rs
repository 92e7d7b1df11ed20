use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use wlfactor::balance::{stronger_balance, BalanceOutcome, ColorSet};
use wlfactor::driver::{factor_batch, RunConfig};
use wlfactor::par::ExecMode;
use wlfactor::wl2::wl2_implicit;
use wlfactor::{Engine, FieldCtx, FpPoly};

/// Roots `a * zeta^i` of a coset of the order-`n` subgroup; these reach WL.
fn coset(p: u64, n: u64, a: u64) -> FpPoly {
    let k = FieldCtx::new(p).unwrap();
    let g = (2..p)
        .find(|&g| (1..p - 1).filter(|e| (p - 1) % e == 0).all(|e| k.pow(g, e) != 1))
        .unwrap();
    let zeta = k.pow(g, (p - 1) / n);
    let roots: Vec<u64> = (0..n).map(|i| k.mul(a, k.pow(zeta, i))).collect();
    FpPoly::from_roots(k, &roots)
}

fn batch_lines() -> Vec<String> {
    [(127, 7), (337, 7), (1297, 9), (2161, 9), (631, 5), (1291, 5), (4159, 7), (9901, 9)]
        .iter()
        .flat_map(|&(p, n)| (2..6).map(move |a| format!("{p};{}", coset(p, n, a).to_text())))
        .collect()
}

fn initial_colors(f: &FpPoly) -> ColorSet {
    match stronger_balance(f, &Engine::default()).unwrap() {
        BalanceOutcome::Colors(cs) => cs,
        BalanceOutcome::Factor(_) => panic!("bench instance must be balanced"),
    }
}

fn modes() -> [(&'static str, ExecMode); 2] {
    [("sequential", ExecMode::Sequential), ("parallel", ExecMode::Parallel)]
}

fn bench_batch(c: &mut Criterion) {
    let lines = batch_lines();
    let mut group = c.benchmark_group("factor_batch");
    group.sample_size(10);
    for (name, mode) in modes() {
        let cfg = RunConfig { exec_mode: mode, ..RunConfig::default() };
        group.bench_with_input(BenchmarkId::from_parameter(name), &cfg, |b, cfg| {
            b.iter(|| factor_batch(black_box(&lines), cfg))
        });
    }
    group.finish();
}

fn bench_wl(c: &mut Criterion) {
    let cs = initial_colors(&coset(9901, 9, 3));
    let mut group = c.benchmark_group("wl2_implicit");
    group.sample_size(10);
    for (name, mode) in modes() {
        let engine = Engine { mode, ..Engine::default() };
        group.bench_with_input(BenchmarkId::from_parameter(name), &engine, |b, engine| {
            b.iter(|| wl2_implicit(black_box(&cs), engine).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_batch, bench_wl);
criterion_main!(benches);
