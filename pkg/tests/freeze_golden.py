"""Recompute the frozen first-step loss used by test_training.py.

Run `python tests/freeze_golden.py` and paste the printed value into
GOLDEN_FIRST_LOSS.  The recipe must stay in sync with
TestTrainStep._setup: double precision, channels 4, patch 16, seed 11
corpus, hyperparameter seed 1, batch drawn with default_rng(2).
"""

import numpy as np

from opnet.basenet import BaseNetConfig
from opnet.hypernet import init_hyperparams
from opnet.training import TrainConfig, _init_optimizer, _training_images, next_batch, train_step


def main():
    cfg = TrainConfig(
        operators=["gaussian"],
        channels=4,
        patch_size=16,
        iterations=5,
        learning_rate=1e-3,
        seed=11,
        corpus_images=4,
        image_size=24,
        precision="double",
        flat_fraction=0.0,
        log_interval=0,
    )
    net = BaseNetConfig.standard(channels=4)
    hp = init_hyperparams(net, 1, seed=1, precision="double")
    opt = _init_optimizer(cfg, hp)
    images = _training_images(cfg)
    batch = next_batch(cfg, cfg.operator_specs(), images, np.random.default_rng(2))
    loss, _ = train_step(hp, opt, batch, net)
    print(f"GOLDEN_FIRST_LOSS = {loss!r}")


if __name__ == "__main__":
    main()
