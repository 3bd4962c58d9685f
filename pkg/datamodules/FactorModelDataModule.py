import os

from pytorch_lightning import LightningDataModule

from datasets.FactorModel import generate_factor_model
from datasets.csv_io import save_csv


class FactorModelDataModule(LightningDataModule):
    """Factor-model rows X = A U + b Z + eps for one seed."""

    def __init__(self, config, seed: int):
        super().__init__()
        self.config = config
        self.spec = config.factor.with_seed(seed)
        self.rows = 2 * config.hparams.n_target
        self.z_balance = config.bounds.z_balance
        self.train = None

    def setup(self, stage=None):
        self.train = generate_factor_model(self.spec, self.rows, self.z_balance)
        return self

    def prepare_data(self, output_dir):
        if self.train is None:
            self.setup()
        save_csv(self.train, os.path.join(output_dir, "data_factor.csv"))
