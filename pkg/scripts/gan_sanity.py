"""Fixation-GAN checks on simulated data: discriminator-only accuracy and generated std.

    python scripts/gan_sanity.py --epochs 100 --save runs/fixation_gan
"""
import argparse
import dataclasses
import time

import numpy as np

from gazesynth.data import TaskSettings, default_profiles, simulate_recording
from gazesynth.events import EventKind, idt_segment
from gazesynth.gan import (GanConfig, GanTrainer, build_segment_dataset, discriminator_accuracy,
                           generate_batch, prepare_model, train_gan)


def collect_segments(n_fixations: int):
    segs = []
    for p in default_profiles(2, seed=0):
        session, count = 0, 0
        while count < n_fixations:
            found = idt_segment(simulate_recording(p, TaskSettings(task="HSS"), session=session))
            session += 1
            segs += found
            count += sum(s.kind is EventKind.FIXATION for s in found)
    return segs


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--epochs", type=int, default=100)
    ap.add_argument("--g-steps", type=int, default=None, help="generator updates per batch")
    ap.add_argument("--fixations", type=int, default=500, help="fixations per subject")
    ap.add_argument("--save", help="directory to save the trained model")
    args = ap.parse_args()

    cfg = GanConfig(kind="fixation", epochs=args.epochs)
    if args.g_steps:
        cfg = dataclasses.replace(cfg, g_steps=args.g_steps)
    ds = build_segment_dataset(collect_segments(args.fixations), EventKind.FIXATION, cfg)
    print(f"{len(ds)} fixation segments")

    fresh = prepare_model(ds, cfg, 0)
    cond = ds.conditions(fresh.ddqfe_scale)
    trainer = GanTrainer(fresh, fresh.to_network(ds.data), cond, np.random.default_rng(0))
    rng = np.random.default_rng(8)
    for _ in range(200):
        trainer.d_step(rng.choice(len(ds), cfg.batch_size, replace=False), generator_training=False)
    held = rng.choice(len(ds), 200, replace=False)
    print(f"discriminator-only accuracy after 200 steps: "
          f"{discriminator_accuracy(fresh, ds.data[held], cond[held], rng):.3f}")

    t0 = time.perf_counter()
    model = train_gan(ds, cfg, progress=lambda r: print(r) if r["epoch"] % 10 == 0 else None)
    print(f"joint training {time.perf_counter() - t0:.0f} s")
    for sid, i in sorted(ds.subject_map.items()):
        real = ds.data[ds.subject_index == i]
        gen = generate_batch(model, rng.standard_normal((500, cfg.latent_dim)),
                             np.tile(model.condition(sid), (500, 1)))
        speed = np.linalg.norm(gen, axis=1).std() / np.linalg.norm(real, axis=1).std()
        print(f"{sid}: velocity std real {real.std():.3f}  generated {gen.std():.3f}  "
              f"ratio {gen.std() / real.std():.2f}  (speed std ratio {speed:.2f})")
    if args.save:
        model.save(args.save)


if __name__ == "__main__":
    main()
