"""Common Spatial Patterns: spatial filters from a generalized eigenproblem."""
import logging
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np
from scipy import linalg

from .errors import OneClassOnly, SingularCovariance

LOG = logging.getLogger('gazeeg.csp')

LOG_VARIANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class CspModel:
    filters: np.ndarray
    eigenvalues: np.ndarray
    channels: Tuple[str, ...] = ()

    @property
    def n_components(self) -> int:
        return self.filters.shape[0]


def _as_data(epoch) -> np.ndarray:
    return np.asarray(getattr(epoch, 'data', epoch), dtype=np.float64)


def normalized_covariance(data: np.ndarray) -> np.ndarray:
    """Covariance of a (channels, samples) epoch divided by its trace."""
    centred = data - data.mean(axis=1, keepdims=True)
    cov = centred @ centred.T
    trace = np.trace(cov)
    return cov / trace if trace > 0 else cov


def _is_target(labels) -> np.ndarray:
    return np.array([label == 'target' or (not isinstance(label, str) and label == 1) for label in labels])


def csp_fit(epochs: Sequence, labels: Sequence, n_components: int = 15, ridge: float = 1e-10,
            channels: Sequence[str] = ()) -> CspModel:
    """
    Fit CSP filters on labelled epochs.

    Solves ``C_target w = lambda (C_target + C_nontarget) w`` on trace-normalized
    class mean covariances and keeps the filters with the largest
    ``max(lambda, 1 - lambda)``. Each filter's largest-magnitude coefficient is
    made positive.

    :param epochs: Epoch objects or (channels, samples) arrays
    :param labels: 'target'/'nontarget' or +1/-1 per epoch
    :param n_components: number of filters to keep
    :param ridge: relative diagonal loading of each class covariance
    :param channels: channel names stored with the model
    :return: fitted model
    """
    target = _is_target(labels)
    if target.all() or not target.any():
        raise OneClassOnly("CSP needs epochs of both classes.")
    covariances = np.stack([normalized_covariance(_as_data(epoch)) for epoch in epochs])
    n_channels = covariances.shape[1]
    if n_components > n_channels:
        raise ValueError("Cannot keep {} CSP components from {} channels.".format(n_components, n_channels))

    class_means = []
    for mask in (target, ~target):
        cov = covariances[mask].mean(axis=0)
        cov = cov + ridge * np.trace(cov) / n_channels * np.eye(n_channels)
        class_means.append(cov)
    try:
        eigenvalues, eigenvectors = linalg.eigh(class_means[0], class_means[0] + class_means[1])
    except linalg.LinAlgError as err:
        raise SingularCovariance("Composite class covariance is not positive definite.") from err

    order = np.argsort(-np.maximum(eigenvalues, 1.0 - eigenvalues), kind='stable')[:n_components]
    filters = eigenvectors[:, order].T.copy()
    signs = np.sign(filters[np.arange(filters.shape[0]), np.argmax(np.abs(filters), axis=1)])
    filters *= np.where(signs == 0, 1.0, signs)[:, None]
    LOG.debug("csp epochs=%d components=%d lambda_max=%.3f", len(covariances), n_components, eigenvalues.max())
    return CspModel(filters=filters, eigenvalues=eigenvalues[order], channels=tuple(channels))


def csp_transform(model: CspModel, epoch) -> np.ndarray:
    """Log-variance of each filtered component, floored at log(1e-12)."""
    projected = model.filters @ _as_data(epoch)
    return np.log(np.maximum(projected.var(axis=1), LOG_VARIANCE_FLOOR))
