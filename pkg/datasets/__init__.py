from datasets.base import Dataset, Domain
