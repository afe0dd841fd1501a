"""End to end at toy scale: generate a small labeled corpus across the 10
interference classes, train the Siamese network on matching pairs, and
classify the held-out split against support exemplars.

Run:  python3 demos/04_corpus_and_training.py
(about two minutes; writes the corpus under demos/out/toy_corpus)

For the real thing use the CLI with a preset:
    hopjam dataset --preset desk --out runs/desk --threads 4 --seed 0
    hopjam train   --preset desk --corpus runs/desk/corpus --out runs/desk
    hopjam eval    --preset desk --corpus runs/desk/corpus \
                   --checkpoint runs/desk/model.ckpt --out runs/desk
"""

import os

from hopjam import dataset, pipeline, siamese, tfa

OUT = os.path.join(os.path.dirname(__file__), "out", "toy_corpus")

corpus_cfg = dataset.CorpusConfig(
    jsr_values_db=(10.0,),
    per_cell=8,
    sample_rate_hz=1e6,
    duration_s=0.02,
    tf=tfa.TfGrid(n_time_bins=64, n_freq_bins=64,
                  freq_range_hz=(4e3, 360e3), window_length=129),
    prep=pipeline.PrepConfig(side=24),
)
manifest = dataset.generate_corpus(corpus_cfg, seed=5, out_dir=OUT, threads=2)
records = dataset.load_manifest(manifest)
print(f"corpus: {len(records)} samples, "
      f"{sum(r.split == 'train' for r in records)} train; manifest {manifest}")

net_cfg = siamese.NetConfig(
    input_side=24,
    conv_channels=(16, 16, 32, 32),
    conv_kernels=(5, 3, 2, 2),
    pool_after=(True, True, True, False),
    embed_dim=32,
)
train_cfg = siamese.TrainConfig(
    iterations=60,
    pairs_per_iteration=30,
    learning_rate=2e-3,
    init_scheme="fan_in",
    seed=1,
)
params, trace = siamese.train(net_cfg, train_cfg, records, OUT)
sm = siamese.smooth_trace(trace)
print(f"training loss: first {trace[0]:.3f}, smoothed last {sm[-1]:.3f}")

report = siamese.evaluate(params, net_cfg, records, OUT,
                          k_support=3, n_draws=3, seed=2)
print(f"10-way accuracy on the test split: "
      f"{report['overall_accuracy']:.1%} over {report['n_queries']} queries "
      f"x {report['n_draws']} support draws (chance is 10%)")
