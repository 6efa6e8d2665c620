"""Matched vs mismatched subject similarity of diffusion samples, with and without the identity loss.

Trains one model per lambda on two simulated subjects and runs 20 synthesis
trials on held-out sessions.  A trial is a win when the synthetic signal's
embedding is closer to its own subject's reference than to the other
subject's recording from the same session.

    python scripts/subject_specificity.py --lambdas 0.1 0.0 --epochs 150
"""
import argparse
import time

import numpy as np

from gazesynth.conditioning import ReferenceEncoder, cosine_similarity
from gazesynth.data import TaskSettings, default_profiles, simulate_recording
from gazesynth.diffusion import DiffusionTrainConfig, build_windows, synthesize_recording, train_diffusion
from gazesynth.quality import recording_velocity


def embed(rec, encoder):
    return encoder.encode_array(recording_velocity(rec, 100.0)[None], 100.0)[0]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--lambdas", type=float, nargs="+", default=[0.1, 0.0])
    ap.add_argument("--epochs", type=int, default=150)
    ap.add_argument("--sessions", type=int, default=12, help="training sessions per subject")
    ap.add_argument("--trials", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    encoder = ReferenceEncoder()
    hss = TaskSettings(task="HSS")
    profiles = default_profiles(2, seed=0)
    ids = [p.subject_id for p in profiles]
    train = [simulate_recording(p, hss, session=s) for p in profiles for s in range(args.sessions)]
    held = {p.subject_id: [simulate_recording(p, hss, session=100 + s) for s in range(args.trials // 2)]
            for p in profiles}
    for lam in args.lambdas:
        cfg = DiffusionTrainConfig(window_s=3.0, window_stride_s=0.5, epochs=args.epochs, lambda_id=lam,
                                   batch_size=16, learning_rate=1e-3, seed=args.seed)
        t0 = time.perf_counter()
        model = train_diffusion(build_windows(train, cfg, encoder), encoder, cfg)
        seconds = time.perf_counter() - t0
        matched, mismatched = [], []
        for i in range(args.trials):
            s, o = ids[i % 2], ids[1 - i % 2]
            syn = synthesize_recording(model, held[s][i // 2], model.subject_embeddings[s],
                                       np.random.default_rng(i))
            e = embed(syn, encoder)
            matched.append(cosine_similarity(e, embed(held[s][i // 2], encoder)))
            mismatched.append(cosine_similarity(e, embed(held[o][i // 2], encoder)))
        wins = int(np.sum(np.array(matched) > np.array(mismatched)))
        print(f"lambda={lam:g} train {seconds:.0f} s  wins {wins}/{args.trials}  "
              f"matched {np.mean(matched):.4f}  mismatched {np.mean(mismatched):.4f}")


if __name__ == "__main__":
    main()
