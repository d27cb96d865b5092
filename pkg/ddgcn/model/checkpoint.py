"""Checkpoint, embedding and training-history files.

A checkpoint is a JSON document holding the model kind, the vocabulary
digest, the GCN config and propagation filter (for GCN heads) and every
parameter array as ``{"shape": [...], "data": [...]}`` in float64 shortest
round-trip form.
"""

import logging
from enum import Enum
from pathlib import Path
from typing import NamedTuple

import numpy as np
from pydantic import ValidationError  # pylint: disable=no-name-in-module

from ddgcn.config import DdgcnModel, GcnConfig, PropagationFilter
from ddgcn.errors import DataFormatError, ShapeError, VocabularyError
from ddgcn.graphbuild import LabelVocabulary
from ddgcn.model.baseline import LinearBaseline
from ddgcn.model.gcn import GcnModel
from ddgcn.model.train import TrainHistory
from ddgcn.utils.io import atomic_write_text, read_matrix_tsv, read_text, write_matrix_tsv


class ModelKind(str, Enum):
    GCN = "gcn"
    LINEAR = "linear"


class ArrayRecord(DdgcnModel):
    shape: list[int]
    data: list[float]

    @classmethod
    def from_array(cls, array: np.ndarray) -> "ArrayRecord":
        return cls(shape=list(array.shape), data=array.ravel().tolist())

    def to_array(self) -> np.ndarray:
        array = np.asarray(self.data, dtype=np.float64)
        if array.size != int(np.prod(self.shape)):
            raise DataFormatError(f"array of shape {self.shape} holds {array.size} values")
        return array.reshape(self.shape)


class Checkpoint(DdgcnModel):
    kind: ModelKind
    vocab_hash: str
    C: int
    gcn: GcnConfig | None = None
    filter: PropagationFilter = PropagationFilter.POWER
    params: dict[str, ArrayRecord]


class LoadedCheckpoint(NamedTuple):
    model: GcnModel | LinearBaseline
    filter: PropagationFilter


def save_checkpoint(
    model: GcnModel | LinearBaseline,
    vocab: LabelVocabulary,
    path: str | Path,
    filter: PropagationFilter = PropagationFilter.POWER,  # pylint: disable=redefined-builtin
) -> None:
    """Write a self-describing checkpoint for ``model`` trained over ``vocab``.

    ``filter`` names the propagation basis the GCN weights were trained with.
    """
    if model.size != len(vocab):
        raise ShapeError(f"model has {model.size} labels, vocabulary has {len(vocab)}")
    checkpoint = Checkpoint(
        kind=ModelKind.GCN if isinstance(model, GcnModel) else ModelKind.LINEAR,
        vocab_hash=vocab.digest(),
        C=model.size,
        gcn=model.config if isinstance(model, GcnModel) else None,
        filter=filter,
        params={name: ArrayRecord.from_array(value) for name, value in model.params().items()},
    )
    atomic_write_text(path, checkpoint.model_dump_json(by_alias=True))
    logging.info(f"Saved {checkpoint.kind.value} checkpoint to {path}")


def read_checkpoint(path: str | Path, vocab: LabelVocabulary | None = None) -> LoadedCheckpoint:
    """Read a checkpoint back into a model and the filter it was trained with.

    Raises:
        DataFormatError: If the file does not parse.
        VocabularyError: If ``vocab`` is given and its digest differs.
    """
    try:
        checkpoint = Checkpoint.model_validate_json(read_text(path))
    except ValidationError as err:
        raise DataFormatError(f"{path}: {str(err).splitlines()[0]}") from err
    if vocab is not None and checkpoint.vocab_hash != vocab.digest():
        raise VocabularyError(f"{path} was trained over a different vocabulary")

    params = {name: record.to_array() for name, record in checkpoint.params.items()}
    if checkpoint.kind is ModelKind.LINEAR:
        return LoadedCheckpoint(LinearBaseline(W=params["W"], bias=params["bias"]), checkpoint.filter)
    if checkpoint.gcn is None:
        raise DataFormatError(f"{path}: gcn checkpoint without config")
    model = GcnModel(
        Z=params["Z"],
        W1=params["W1"],
        W2=params["W2"],
        A=params.get("A"),
        b=params.get("b"),
        config=checkpoint.gcn,
    )
    return LoadedCheckpoint(model, checkpoint.filter)


def load_checkpoint(
    path: str | Path, vocab: LabelVocabulary | None = None
) -> GcnModel | LinearBaseline:
    return read_checkpoint(path, vocab).model


def save_history(history: TrainHistory, path: str | Path) -> None:
    atomic_write_text(path, history.model_dump_json(indent=2) + "\n")


def load_embeddings(path: str | Path, vocab_size: int, d0: int) -> np.ndarray:
    """Read a C x d0 tab-separated embedding file, rows in vocabulary order."""
    embeddings = read_matrix_tsv(path)
    if embeddings.shape != (vocab_size, d0):
        raise ShapeError(f"{path} holds {embeddings.shape} embeddings, expected {(vocab_size, d0)}")
    return embeddings


def save_embeddings(embeddings: np.ndarray, path: str | Path) -> None:
    write_matrix_tsv(path, embeddings)
