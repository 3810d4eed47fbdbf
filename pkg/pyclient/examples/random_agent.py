#!/usr/bin/env python3
"""Drive a remote environment with uniform random actions."""

import random
import sys

from sslpath_client import make


def main():
    env_name = sys.argv[1] if len(sys.argv) > 1 else "proposed"
    episodes = int(sys.argv[2]) if len(sys.argv) > 2 else 3
    rng = random.Random(0)
    with make(env_name, config={"frame_skip": 16}) as env:
        print(f"{env_name}: obs_dim={env.observation_dim} "
              f"action_dim={env.action_dim}")
        for ep in range(episodes):
            env.reset(seed=ep)
            total, steps = 0.0, 0
            while True:
                action = [rng.uniform(-1, 1) for _ in range(env.action_dim)]
                obs, reward, terminated, truncated, info = env.step(action)
                total += reward
                steps += 1
                if terminated or truncated:
                    break
            print(f"episode {ep}: decisions={steps} return={total:.1f} "
                  f"terminated={terminated}")


if __name__ == "__main__":
    main()
