"""scikit-learn style wrappers around a programmed crossbar."""

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import nn
from ._validation import check_activations
from .device import DeviceParams
from .encode import effective_weights, encode
from .quant import QuantizedMatrix
from .schemes import resolve
from .xbar import MacConfig, MacStats, SubtractDomain, exact_matvec, matvec, program_matrix


class _CrossbarParams:
    def _device(self):
        return DeviceParams(g_max=self.g_max, r_ratio=self.r_ratio,
                            bits_per_cell=self.bits_per_cell, sigma=self.sigma)

    def _mac(self, stack):
        return MacConfig(self.naw, stack.compensation, self.analog_bias, SubtractDomain(self.subtract))

    def _rng(self):
        rs = self.random_state
        if isinstance(rs, np.random.Generator):
            return rs
        return np.random.default_rng(rs)


class CrossbarLinear(_CrossbarParams, TransformerMixin, BaseEstimator):
    """Integer linear map ``X @ W`` computed on a simulated crossbar.

    ``fit(W)`` encodes and programs the signed integer matrix ``W``
    (shape ``(rows, cols)``); ``transform(X)`` takes unsigned 8-bit
    activations with ``rows`` features and returns the simulated MAC output.
    Every ``fit`` draws one device-variation instance from ``random_state``.
    """

    def __init__(self, scheme="vecom", bits_per_cell=2, sigma=0.0, r_ratio=300.0, naw=128,
                 g_max=1.0, bit_width=8, analog_bias=False, subtract="analog", random_state=None):
        self.scheme = scheme
        self.bits_per_cell = bits_per_cell
        self.sigma = sigma
        self.r_ratio = r_ratio
        self.naw = naw
        self.g_max = g_max
        self.bit_width = bit_width
        self.analog_bias = analog_bias
        self.subtract = subtract
        self.random_state = random_state

    def fit(self, X, y=None):
        q = X if isinstance(X, QuantizedMatrix) else QuantizedMatrix(X, bit_width=self.bit_width)
        self.stack_ = resolve(self.scheme)
        self.weights_ = q
        self.encoded_ = encode(q, self.stack_.encoding, self.bits_per_cell)
        self.programmed_ = program_matrix(self.encoded_, self._device(), self.stack_.programming,
                                          self._rng(), analog_bias=self.analog_bias)
        self.n_features_in_ = q.rows
        self.stats_ = MacStats()
        return self

    def transform(self, X):
        check_is_fitted(self, "programmed_")
        a = check_activations(X, rows=self.n_features_in_)
        return matvec(self.programmed_, a, self._mac(self.stack_), stats=self.stats_)

    def exact(self, X):
        """Integer oracle for the stored (possibly clipped) weights."""
        check_is_fitted(self, "weights_")
        a = check_activations(X, rows=self.n_features_in_)
        return exact_matvec(effective_weights(self.weights_, self.stack_.encoding), a)


class CrossbarMLPClassifier(_CrossbarParams, ClassifierMixin, BaseEstimator):
    """Quantized MLP trained in software, evaluated on simulated crossbars.

    ``X`` holds 8-bit activation codes (0..255). ``fit`` trains the float
    reference, quantizes it and programs every layer with one variation draw.
    """

    def __init__(self, hidden=(16,), epochs=30, lr=0.1, scheme="vecom", bits_per_cell=2,
                 sigma=0.0, r_ratio=300.0, naw=128, g_max=1.0, bit_width=8, analog_bias=False,
                 subtract="analog", random_state=None):
        self.hidden = hidden
        self.epochs = epochs
        self.lr = lr
        self.scheme = scheme
        self.bits_per_cell = bits_per_cell
        self.sigma = sigma
        self.r_ratio = r_ratio
        self.naw = naw
        self.g_max = g_max
        self.bit_width = bit_width
        self.analog_bias = analog_bias
        self.subtract = subtract
        self.random_state = random_state

    def fit(self, X, y):
        a = check_activations(X)
        self.classes_, codes = np.unique(np.asarray(y), return_inverse=True)
        if len(self.classes_) < 2:
            raise ValueError("need at least two classes")
        rng = self._rng()
        seed = int(rng.integers(2**63))
        data = nn.Dataset(a, codes, len(self.classes_))
        self.model_ = nn.train_reference(data, tuple(self.hidden), self.epochs, seed, self.lr,
                                         self.bit_width)
        self.stack_ = resolve(self.scheme)
        self.programmed_ = nn.program_model(self.model_, self.stack_, self._device(), rng,
                                            self.analog_bias)
        self.n_features_in_ = a.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "programmed_")
        a = check_activations(X, rows=self.n_features_in_)
        return nn.simulated_logits(self.model_, a, self.programmed_, self._mac(self.stack_))

    def predict(self, X):
        return self.classes_[np.argmax(self.decision_function(X), axis=1)]

    def predict_software(self, X):
        """Prediction of the integer reference without the analog pipeline."""
        check_is_fitted(self, "model_")
        a = check_activations(X, rows=self.n_features_in_)
        return self.classes_[np.argmax(nn.software_logits(self.model_, a, self.stack_.encoding), axis=1)]
