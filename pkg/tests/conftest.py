import pytest

from tparn.spatializer import generate_dataset
from tparn.synth import write_corpus

SMALL_MODEL = dict(channels=4, frame_size=8, frame_shift=4, chunk_size=4, chunk_shift=2, dim=6, num_blocks=2)


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory):
    """Eight short 4-channel mixtures split 6/1/1; returns (manifest path, entries)."""
    root = tmp_path_factory.mktemp("small_dataset")
    speech, noise = write_corpus(root / "corpus", num_speech=8, num_noise=8, seconds=(0.2, 0.3), seed=3)
    split = {"train": 6 / 8, "validation": 1 / 8, "test": 1 / 8}
    entries = generate_dataset(split, speech, noise, root / "data", rng_seed=5, max_order=2,
                               utterance_seconds=None)
    return root / "data" / "manifest.jsonl", entries
