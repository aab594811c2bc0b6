"""Implicit-induction prover for conditional equational specifications."""
from importlib import resources
from pathlib import Path

__version__ = "0.1.0"


def corpus_path(name: str = "corpus.spk") -> Path:
    """Path of a file shipped in the bundled corpus."""
    return Path(str(resources.files(__package__).joinpath("corpus", name)))
