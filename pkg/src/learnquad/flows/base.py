"""Shared estimator machinery for the torch-backed transport models."""

import math

import numpy as np
import torch
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ..exceptions import DivergedTrainingError, InvalidArgumentError
from .nets import DTYPE

__all__ = ["TorchTransport", "check_latent"]


def check_latent(model, X, name="X"):
    """Validate a 2-D float array against the fitted input width."""
    X = check_array(X, dtype=np.float64, ensure_all_finite=True, input_name=name)
    if X.shape[1] != model.n_features_in_:
        raise InvalidArgumentError(
            f"{name} has {X.shape[1]} columns, model was fitted on {model.n_features_in_}"
        )
    return X


class TorchTransport(TransformerMixin, BaseEstimator):
    """Base for transports whose maps are torch modules.

    ``transform`` sends data to the standard-normal latent space (the
    normalizing map) and ``inverse_transform`` pushes latent points to data
    space (the generative map). Subclasses implement ``_build``,
    ``_train_step`` and the two maps.
    """

    _config_fields = ()

    @classmethod
    def from_config(cls, config, **overrides):
        """Instantiate from a :class:`~learnquad.flows.config.TrainConfig`."""
        params = {name: getattr(config, name) for name in cls._config_fields}
        params["random_state"] = config.seed
        params.update(overrides)
        return cls(**params)

    # -- training -----------------------------------------------------------------
    def _validate_training_data(self, X):
        X = check_array(X, dtype=np.float64, ensure_min_samples=2, input_name="X")
        if X.shape[0] < 2 * self.batch_size:
            raise InvalidArgumentError(
                f"need at least 2 * batch_size = {2 * self.batch_size} samples, got {X.shape[0]}"
            )
        return X

    def _optimizer(self):
        opt = torch.optim.Adam(self._modules_().parameters(), lr=self.lr, betas=tuple(self.betas), eps=self.adam_eps)
        sched = torch.optim.lr_scheduler.MultiStepLR(opt, milestones=list(self.lr_milestones), gamma=self.lr_gamma)
        return opt, sched

    def fit(self, X, y=None, log_path=None):
        """Train on the rows of ``X``.

        Parameters
        ----------
        X : array_like, shape (n_samples, M)
        y : ignored
        log_path : path, optional
            Write the per-epoch mean loss as CSV ``epoch,loss``.

        Raises
        ------
        DivergedTrainingError
            If a minibatch loss becomes non-finite.
        """
        X = self._validate_training_data(X)
        self.n_features_in_ = X.shape[1]
        gen = torch.Generator().manual_seed(int(self.random_state))
        self._build(self.n_features_in_, gen)
        data = torch.from_numpy(X)
        self._prepare(data, gen)
        opt, sched = self._optimizer()
        n_batches = len(data) // self.batch_size
        curve = []
        for epoch in range(1, self.epochs + 1):
            order = torch.randperm(len(data), generator=gen)
            total = 0.0
            for b in range(n_batches):
                batch = data[order[b * self.batch_size : (b + 1) * self.batch_size]]
                loss = self._loss(batch, gen)
                value = float(loss.detach())
                if not math.isfinite(value):
                    raise DivergedTrainingError(epoch, value)
                opt.zero_grad(set_to_none=True)
                loss.backward()
                opt.step()
                total += value
            sched.step()
            curve.append(total / n_batches)
        self.loss_curve_ = np.array(curve)
        if log_path is not None:
            write_training_log(self.loss_curve_, log_path)
        return self

    # -- persistence helpers ------------------------------------------------------
    def _state_arrays(self):
        check_is_fitted(self, "n_features_in_")
        arrays = {k: v.detach().numpy().copy() for k, v in self._modules_().state_dict().items()}
        arrays.update(self._extra_arrays())
        arrays["loss_curve_"] = np.asarray(self.loss_curve_, dtype=float)
        return arrays

    def _load_state_arrays(self, n_features, arrays):
        self.n_features_in_ = n_features
        self._build(n_features, torch.Generator().manual_seed(0))
        module = self._modules_()
        state = {k: torch.from_numpy(np.array(arrays[k], dtype=np.float64)) for k in module.state_dict()}
        module.load_state_dict(state)
        self._load_extra_arrays(arrays)
        self.loss_curve_ = np.array(arrays["loss_curve_"], dtype=float)
        return self

    def _extra_arrays(self):
        return {}

    def _load_extra_arrays(self, arrays):
        pass

    @staticmethod
    def _to_torch(X):
        return torch.as_tensor(np.ascontiguousarray(X, dtype=np.float64), dtype=DTYPE)


def write_training_log(curve, path):
    with open(path, "w") as fh:
        fh.write("epoch,loss\n")
        for epoch, loss in enumerate(curve, start=1):
            fh.write(f"{epoch},{loss:.17g}\n")
