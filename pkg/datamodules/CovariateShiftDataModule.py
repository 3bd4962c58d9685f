import os

from pytorch_lightning import LightningDataModule

from datasets.CovariateShift import generate_covariate_shift, generate_general_shift
from datasets.csv_io import save_csv
from models.graph import LaplacianGraph, build_graph


class CovariateShiftDataModule(LightningDataModule):
    """Source/target draws of one seed for the covariate (or general) shift experiments."""

    def __init__(self, config, seed: int):
        super().__init__()
        self.config = config
        self.spec = config.data.with_seed(seed)
        self.kernel = config.kernel
        self.general_shift = config.hparams.experiment == "general_shift_t5"
        self.source = None
        self.target = None

    def setup(self, stage=None):
        generate = generate_general_shift if self.general_shift else generate_covariate_shift
        self.source, self.target = generate(self.spec, self.config.hparams.n_source, self.config.hparams.n_target)
        return self

    def prepare_data(self, output_dir):
        """Write the draws as data_source.csv / data_target.csv."""
        if self.source is None:
            self.setup()
        save_csv(self.source, os.path.join(output_dir, "data_source.csv"))
        save_csv(self.target, os.path.join(output_dir, "data_target.csv"))

    def graph(self) -> LaplacianGraph:
        # target labels never enter the graph
        return build_graph(self.source, self.target.without_labels(), self.kernel)
