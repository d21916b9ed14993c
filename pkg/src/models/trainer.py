"""Mini-batch training loop with validation-loss early stopping."""
import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd
from sklearn.model_selection import ParameterGrid
from tqdm import tqdm

from config.settings import PipelineConfig, config
from src.data.dataset import SentenceDataset, batch_indices
from src.models.classifier import MlpClassifier, evaluate_batch, loss_and_gradients
from src.models.embedding import EmbeddingBackend
from src.models.optimizer import AdamState, adam_step
from src.utils.errors import EmptyDataset, NonFiniteLoss, ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Hyperparams:
    batch_size: int = 8
    learning_rate: float = 0.001
    beta_1: float = 0.9
    beta_2: float = 0.99
    epsilon: float = 1e-7
    max_epochs: int = 20
    patience: int = 3
    hidden: Tuple[int, int] = (256, 64)
    init_seed: int = 0
    shuffle_seed: int = 1

    def __post_init__(self):
        for name in ("batch_size", "max_epochs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.learning_rate <= 0 or self.epsilon <= 0:
            raise ValueError("learning_rate and epsilon must be positive")
        if not (0.0 < self.beta_1 < 1.0 and 0.0 < self.beta_2 < 1.0):
            raise ValueError(f"betas must lie in (0, 1), got {self.beta_1}, {self.beta_2}")
        if self.patience < 0:
            raise ValueError(f"patience must be >= 0, got {self.patience}")
        if len(self.hidden) != 2 or min(self.hidden) < 1:
            raise ValueError(f"hidden must be two positive widths, got {self.hidden}")

    @classmethod
    def from_config(cls, cfg: PipelineConfig) -> "Hyperparams":
        return cls(cfg.batch_size, cfg.learning_rate, cfg.beta_1, cfg.beta_2, cfg.epsilon,
                   cfg.max_epochs, cfg.patience, (cfg.hidden_1, cfg.hidden_2),
                   cfg.init_seed, cfg.shuffle_seed)

    def to_dict(self) -> Dict:
        payload = asdict(self)
        payload["hidden"] = list(self.hidden)
        return payload


@dataclass
class TrainReport:
    train_loss: List[float] = field(default_factory=list)
    train_accuracy: List[float] = field(default_factory=list)
    val_loss: List[float] = field(default_factory=list)
    val_accuracy: List[float] = field(default_factory=list)
    stopped_epoch: int = 0
    best_epoch: int = 0

    def record(self, train_loss: float, train_accuracy: float, val_loss: float, val_accuracy: float) -> None:
        self.train_loss.append(train_loss)
        self.train_accuracy.append(train_accuracy)
        self.val_loss.append(val_loss)
        self.val_accuracy.append(val_accuracy)
        self.stopped_epoch = len(self.train_loss)

    @property
    def best_val_loss(self) -> float:
        return self.val_loss[self.best_epoch - 1] if self.best_epoch else float("inf")

    def to_dict(self) -> Dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: Dict) -> "TrainReport":
        return cls(**{key: payload[key] for key in
                      ("train_loss", "train_accuracy", "val_loss", "val_accuracy", "stopped_epoch", "best_epoch")})

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame({
            "epoch": range(1, self.stopped_epoch + 1),
            "train_loss": self.train_loss,
            "train_accuracy": self.train_accuracy,
            "val_loss": self.val_loss,
            "val_accuracy": self.val_accuracy,
        })


def build_model(dataset: SentenceDataset, hyperparams: Hyperparams, backend: EmbeddingBackend) -> MlpClassifier:
    """Freshly initialized classifier sized for ``dataset`` and ``backend``."""
    return MlpClassifier.initialize(backend.dimension, hyperparams.hidden, dataset.label_set,
                                    seed=hyperparams.init_seed, backend_name=backend.get_name())


def embed_dataset(dataset: SentenceDataset, backend: EmbeddingBackend) -> np.ndarray:
    texts = dataset.texts()
    unique = list(dict.fromkeys(texts))
    vectors = backend.embed_batch(unique)
    row = {text: i for i, text in enumerate(unique)}
    return vectors[[row[t] for t in texts]] if texts else vectors


def train(model: MlpClassifier, train_ds: SentenceDataset, val_ds: SentenceDataset,
          hyperparams: Hyperparams, backend: EmbeddingBackend) -> Tuple[MlpClassifier, TrainReport]:
    """Train ``model`` with Adam and return the best-validation-loss weights.

    Training stops after ``max_epochs`` or once the validation loss has failed
    to improve on ``patience`` epochs since the last improvement. The input
    model is not modified.

    Args:
        model: Initialized classifier (see ``build_model``)
        train_ds: Training samples
        val_ds: Validation samples, disjoint descriptions
        hyperparams: Optimizer and stopping settings
        backend: Embedding backend matching ``model``'s input dimension

    Returns:
        Tuple of (trained model, TrainReport)
    """
    if len(train_ds) == 0 or len(val_ds) == 0:
        raise EmptyDataset(f"training needs nonempty datasets (train={len(train_ds)}, validation={len(val_ds)})")
    if train_ds.label_set != model.label_set or val_ds.label_set != model.label_set:
        raise ValidationError("train/validation label sets do not match the model")

    logger.info(f"Training {train_ds.attribute.value} classifier {model.layer_dims} on "
                f"{len(train_ds)} samples ({len(val_ds)} validation), backend {backend.get_name()}")
    X_train = embed_dataset(train_ds, backend)
    y_train = train_ds.label_indices()
    X_val = embed_dataset(val_ds, backend)
    y_val = val_ds.label_indices()

    current = model.copy()
    state = AdamState.for_parameters(current.parameters(), hyperparams.beta_1,
                                     hyperparams.beta_2, hyperparams.epsilon)
    report = TrainReport()
    best_params = [p.copy() for p in current.parameters()]
    best_loss = float("inf")
    wait = 0

    epochs = tqdm(range(1, hyperparams.max_epochs + 1), desc=f"Training {train_ds.attribute.value}",
                  disable=not config.SHOW_PROGRESS)
    for epoch in epochs:
        for idx in batch_indices(len(train_ds), hyperparams.batch_size, hyperparams.shuffle_seed + epoch):
            _, grads = loss_and_gradients(current, X_train[idx], y_train[idx])
            current.set_parameters(adam_step(state, current.parameters(), grads, hyperparams.learning_rate))

        train_loss, train_accuracy = evaluate_batch(current, X_train, y_train)
        val_loss, val_accuracy = evaluate_batch(current, X_val, y_val)
        report.record(train_loss, train_accuracy, val_loss, val_accuracy)
        logger.info(f"Epoch {epoch}: loss {train_loss:.4f} acc {train_accuracy:.4f} | "
                    f"val_loss {val_loss:.4f} val_acc {val_accuracy:.4f}")

        if val_loss < best_loss:
            best_loss = val_loss
            best_params = [p.copy() for p in current.parameters()]
            report.best_epoch = epoch
            wait = 0
        else:
            wait += 1
            if wait >= hyperparams.patience:
                logger.info(f"Early stopping at epoch {epoch} (best epoch {report.best_epoch}, "
                            f"val_loss {best_loss:.4f})")
                break

    current.set_parameters(best_params)
    return current, report


@dataclass(frozen=True)
class TuningTrial:
    learning_rate: float
    batch_size: int
    best_val_loss: float
    best_epoch: int
    stopped_epoch: int


@dataclass
class TuningResult:
    """Every grid point tried, in grid order."""

    trials: List[TuningTrial] = field(default_factory=list)

    @property
    def best(self) -> TuningTrial:
        """Lowest best-epoch validation loss; the earliest grid point wins ties."""
        if not self.trials:
            raise EmptyDataset("no tuning trials were run")
        return min(self.trials, key=lambda t: t.best_val_loss)

    def apply(self, hyperparams: Hyperparams) -> Hyperparams:
        best = self.best
        return replace(hyperparams, learning_rate=best.learning_rate, batch_size=best.batch_size)

    def selected(self) -> Dict:
        best = self.best
        return {"learning_rate": best.learning_rate, "batch_size": best.batch_size,
                "best_val_loss": best.best_val_loss}

    def to_dict(self) -> Dict:
        return {"trials": [asdict(t) for t in self.trials], "selected": self.selected()}

    @classmethod
    def from_dict(cls, payload: Dict) -> "TuningResult":
        return cls([TuningTrial(float(t["learning_rate"]), int(t["batch_size"]), float(t["best_val_loss"]),
                                int(t["best_epoch"]), int(t["stopped_epoch"])) for t in payload["trials"]])

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(t) for t in self.trials])


def grid_search(train_ds: SentenceDataset, val_ds: SentenceDataset, hyperparams: Hyperparams,
                backend: EmbeddingBackend, learning_rates: Sequence[float],
                batch_sizes: Sequence[int]) -> TuningResult:
    """Train one model per (batch size, learning rate) pair and keep the validation losses.

    Grid values are visited in ascending order, batch size outer. A trial
    whose loss diverges is recorded with an infinite loss. All other settings
    come from ``hyperparams``.
    """
    if not learning_rates or not batch_sizes:
        raise ValueError("grid search needs at least one learning rate and one batch size")
    grid = ParameterGrid({"batch_size": sorted(set(int(b) for b in batch_sizes)),
                          "learning_rate": sorted(set(float(lr) for lr in learning_rates))})
    logger.info(f"Grid search over {len(grid)} settings for {train_ds.attribute.value}")

    result = TuningResult()
    for point in grid:
        trial_params = replace(hyperparams, **point)
        model = build_model(train_ds, trial_params, backend)
        try:
            _, report = train(model, train_ds, val_ds, trial_params, backend)
            trial = TuningTrial(trial_params.learning_rate, trial_params.batch_size, report.best_val_loss,
                                report.best_epoch, report.stopped_epoch)
        except NonFiniteLoss as e:
            logger.warning(f"lr {trial_params.learning_rate:g}, batch {trial_params.batch_size} diverged: {str(e)}")
            trial = TuningTrial(trial_params.learning_rate, trial_params.batch_size, float("inf"), 0, 0)
        logger.info(f"lr {trial.learning_rate:g}, batch {trial.batch_size}: "
                    f"val_loss {trial.best_val_loss:.4f} (best epoch {trial.best_epoch})")
        result.trials.append(trial)

    best = result.best
    logger.info(f"Selected lr {best.learning_rate:g}, batch {best.batch_size} (val_loss {best.best_val_loss:.4f})")
    return result
