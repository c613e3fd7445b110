use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use ethpos_bench::{attested_chain, fork_tree};
use ethpos_core::chain::Digest;
use ethpos_core::finality::{justification_finalization, FinalityState};
use ethpos_core::fork_choice::get_head_block;
use ethpos_core::leak::{ejection_epoch_accounting, Behavior};
use ethpos_core::netsim::{run, ScenarioConfig};
use ethpos_core::randao::{compute_shuffled_index, shuffle_permutation};

fn shuffle(c: &mut Criterion) {
    let seed = Digest([7; 32]);
    let mut g = c.benchmark_group("shuffle");
    for n in [100usize, 1000, 10_000] {
        g.bench_with_input(BenchmarkId::new("permutation", n), &n, |b, &n| b.iter(|| shuffle_permutation(&seed, n)));
    }
    g.bench_function("single_index_1000", |b| b.iter(|| compute_shuffled_index(black_box(517), &seed, 1000)));
    g.finish();
}

fn fork_choice(c: &mut Criterion) {
    let mut g = c.benchmark_group("fork_choice");
    for (blocks, validators) in [(64usize, 128usize), (512, 1024)] {
        let (tree, reg, root) = fork_tree(blocks, validators, 1);
        g.bench_function(format!("head_{blocks}_blocks_{validators}_votes"), |b| {
            b.iter(|| get_head_block(&tree, &reg, &root).unwrap())
        });
    }
    g.finish();
}

fn epoch_transition(c: &mut Criterion) {
    let mut g = c.benchmark_group("epoch_transition");
    let (tree, reg, heads) = attested_chain(512, 6);
    let genesis = FinalityState::genesis(heads[0]);
    g.bench_function("ffg_six_epochs_512", |b| {
        b.iter(|| {
            let mut s = genesis.clone();
            for e in 1..heads.len() as u64 {
                s = justification_finalization(&tree, &heads[e as usize], &s, &reg, e).unwrap();
            }
            s
        })
    });
    g.bench_function("leak_accounting_to_ejection", |b| b.iter(|| ejection_epoch_accounting(black_box(Behavior::Inactive))));
    let cfg = ScenarioConfig::parse("n = 64\nepochs = 4\n").unwrap();
    g.sample_size(10);
    g.bench_function("netsim_64_validators_4_epochs", |b| b.iter(|| run(&cfg).unwrap()));
    g.finish();
}

criterion_group!(benches, shuffle, fork_choice, epoch_transition);
criterion_main!(benches);
