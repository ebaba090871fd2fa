from .augment import AugmentConfig, augment
from .dataset import (
    Dataset,
    DatasetRecord,
    SchemaVersionError,
    generate_dataset,
    mixture_sampler,
    read_dataset,
    weaken_dataset,
    weaken_instance,
    write_dataset,
)
from .render import DEFAULT_VOCABULARY, SynthConfig, render_sample

__all__ = [
    "AugmentConfig", "augment", "Dataset", "DatasetRecord",
    "SchemaVersionError", "generate_dataset", "mixture_sampler",
    "read_dataset", "weaken_dataset", "weaken_instance", "write_dataset",
    "DEFAULT_VOCABULARY", "SynthConfig", "render_sample",
]
