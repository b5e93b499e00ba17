"""Estimator-style wrappers around the two hybrid optimizers.

Hyperparameters go to ``__init__``; ``fit(channels, partition)`` runs the
alternation and stores the fitted configuration in trailing-underscore
attributes.  ``score`` evaluates the fitted configuration on a channel set
(the training one by default).
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import hp_sdr_fp, wf_gpi_grr
from .model import ChannelSet, ElementPartition, SystemConfig, achievable_rate, evaluate_snr, is_feasible


def _check_inputs(channels, partition, config):
    if not isinstance(channels, ChannelSet):
        raise TypeError(f"expected a ChannelSet, got {type(channels).__name__}")
    if partition is None:
        partition = ElementPartition.random(channels.N, config.K, 0)
    if not isinstance(partition, ElementPartition):
        raise TypeError(f"expected an ElementPartition, got {type(partition).__name__}")
    if partition.N != channels.N or config.M != channels.M:
        raise ValueError(
            f"channels have (M={channels.M}, N={channels.N}), config M={config.M}, partition N={partition.N}"
        )
    return partition


class _RelayOptimizerMixin:
    def _config(self):
        return self.config if self.config is not None else SystemConfig()

    def score(self, channels=None, partition=None):
        """Achievable rate (bits/s/Hz) of the fitted configuration."""
        check_is_fitted(self, "state_")
        channels = self.channels_ if channels is None else channels
        partition = self.partition_ if partition is None else partition
        return achievable_rate(evaluate_snr(self.state_, channels, partition, self._config()))

    def is_feasible(self, rtol=1e-6):
        check_is_fitted(self, "state_")
        return is_feasible(self.state_, self.channels_, self.partition_, self._config(), rtol)


class HpSdrFpOptimizer(_RelayOptimizerMixin, BaseEstimator):
    """SDR-based alternating optimizer.

    Parameters
    ----------
    config : SystemConfig, optional
    max_iter : int
        Outer alternation limit.
    tol : float
        Stop once the best rate improves by at most ``tol`` bits/s/Hz.
    n_samples : int
        Gaussian randomisation draws per non-rank-one SDP solution.
    rescale_relay : bool
        Let the slot-1 step rescale the relay gain (see ``solve_theta1``).
    random_state : None, int or SeedSequence
    """

    def __init__(self, config=None, max_iter=30, tol=1e-3, n_samples=200, rescale_relay=True, random_state=None):
        self.config = config
        self.max_iter = max_iter
        self.tol = tol
        self.n_samples = n_samples
        self.rescale_relay = rescale_relay
        self.random_state = random_state

    def fit(self, channels, partition=None):
        cfg = self._config()
        partition = _check_inputs(channels, partition, cfg)
        opt = hp_sdr_fp.OptimizerConfig(
            max_iter=self.max_iter,
            tol=self.tol,
            n_samples=self.n_samples,
            random_state=self.random_state,
            rescale_relay=self.rescale_relay,
        )
        res = hp_sdr_fp.optimize(channels, partition, cfg, opt)
        self.channels_, self.partition_ = channels, partition
        self.state_ = res.state
        self.rate_ = res.rate
        self.rate_trace_ = np.asarray(res.trace)
        self.n_iter_ = res.n_iter
        return self


class WfGpiGrrOptimizer(_RelayOptimizerMixin, BaseEstimator):
    """Whitening + GPI + GRR alternating optimizer with fixed active gains."""

    def __init__(self, config=None, max_iter=30, tol=1e-3, gpi_tol=1e-6, gpi_max_iter=100, random_state=None):
        self.config = config
        self.max_iter = max_iter
        self.tol = tol
        self.gpi_tol = gpi_tol
        self.gpi_max_iter = gpi_max_iter
        self.random_state = random_state

    def fit(self, channels, partition=None):
        cfg = self._config()
        partition = _check_inputs(channels, partition, cfg)
        opt = wf_gpi_grr.WfConfig(
            max_iter=self.max_iter,
            tol=self.tol,
            gpi=wf_gpi_grr.GpiConfig(self.gpi_tol, self.gpi_max_iter),
            random_state=self.random_state,
        )
        res = wf_gpi_grr.optimize(channels, partition, cfg, opt)
        self.channels_, self.partition_ = channels, partition
        self.state_ = res.state
        self.rate_ = res.rate
        self.rate_trace_ = np.asarray(res.trace)
        self.n_iter_ = res.n_iter
        self.beta1_, self.beta2_ = res.beta1, res.beta2
        return self
