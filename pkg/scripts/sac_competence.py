"""Measure the pure-pursuit oracle on lane_centering, then baseline SAC against it.

    python scripts/sac_competence.py [--timesteps 30000] [--seeds 0 1 2]
"""
import argparse
import json
import logging

from fast_transfer.experiments import lane_centering_oracle, sac_competence


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--timesteps", type=int, default=30_000)
    p.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    p.add_argument("--episodes", type=int, default=10)
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    oracle = lane_centering_oracle(args.episodes)
    print("oracle", json.dumps(oracle))
    print(json.dumps(sac_competence(tuple(args.seeds), args.timesteps, args.episodes, oracle), indent=1))


if __name__ == "__main__":
    main()
