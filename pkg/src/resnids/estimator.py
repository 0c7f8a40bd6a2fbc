"""scikit-learn style wrappers so the networks and the encoder compose with
the wider ecosystem (pipelines, clone, cross-validation helpers)."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .data import apply_encoder, fit_encoder
from .errors import ConfigError
from .network import NetworkConfig, build_network
from .schemas import Schema, get_schema
from .training import TrainConfig, evaluate, train


class NetClassifier(BaseEstimator, ClassifierMixin):
    """Residual (or plain) CNN+GRU classifier with fit/predict semantics.

    ``X`` is a standardized feature matrix [n_samples, n_features]; the
    network is built at fit time with one channel column per feature
    (``input_time`` timesteps).  Training follows the RMSprop defaults of
    :class:`resnids.training.TrainConfig`.
    """

    def __init__(self, arch: str = "residual", blocks: int = 5,
                 kernel: int = 10, dropout_rate: float = 0.6,
                 learning_rate: float = 0.01, epochs: int = 50,
                 batch_size: int = 4000, rms_decay: float = 0.9,
                 rms_epsilon: float = 1e-7, gradient_clip: float | None = None,
                 input_time: int = 1, random_state: int = 0):
        self.arch = arch
        self.blocks = blocks
        self.kernel = kernel
        self.dropout_rate = dropout_rate
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.rms_decay = rms_decay
        self.rms_epsilon = rms_epsilon
        self.gradient_clip = gradient_clip
        self.input_time = input_time
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        self.classes_, y_idx = np.unique(y, return_inverse=True)
        if self.classes_.size < 2:
            raise ConfigError("fit needs at least two classes")
        onehot = np.zeros((X.shape[0], self.classes_.size))
        onehot[np.arange(X.shape[0]), y_idx] = 1.0

        net_cfg = NetworkConfig(
            blocks=self.blocks, kind=self.arch, features=X.shape[1],
            classes=self.classes_.size, kernel=self.kernel,
            dropout_rate=self.dropout_rate, input_time=self.input_time,
            seed=self.random_state,
        )
        train_cfg = TrainConfig(
            learning_rate=self.learning_rate, epochs=self.epochs,
            batch_size=self.batch_size, rms_decay=self.rms_decay,
            rms_epsilon=self.rms_epsilon, seed=self.random_state,
            gradient_clip=self.gradient_clip,
        )
        self.network_ = build_network(net_cfg)
        self.history_ = train(self.network_, X, onehot,
                              np.arange(X.shape[0]), None, train_cfg)
        self.n_features_in_ = X.shape[1]
        self.loss_curve_ = [e.train_loss for e in self.history_.epochs]
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "network_")
        X = check_array(X, dtype=np.float64)
        dummy = np.zeros((X.shape[0], self.classes_.size))
        dummy[:, 0] = 1.0
        return evaluate(self.network_, X, dummy).probs

    def predict(self, X):
        probs = self.predict_proba(X)
        return self.classes_[probs.argmax(axis=1)]


class FlowEncoder(BaseEstimator, TransformerMixin):
    """Fit/transform wrapper over the one-hot + z-score flow encoder.

    ``X`` is a sequence of raw rows (CSV field values in schema order,
    strings or numbers).  ``transform`` returns the encoded float matrix;
    ``encode_labels`` maps the label column to class names.
    """

    def __init__(self, schema: Schema | str = "nslkdd"):
        self.schema = schema

    def _schema(self) -> Schema:
        if isinstance(self.schema, Schema):
            return self.schema
        return get_schema(self.schema)

    def _split(self, X):
        schema = self._schema()
        label_i = schema.label_index
        rows, labels = [], []
        from .schemas import label_class

        for row in X:
            row = list(row)
            if len(row) != schema.n_fields:
                raise ConfigError(
                    f"row has {len(row)} fields, schema expects {schema.n_fields}"
                )
            typed = []
            for i, col in enumerate(schema.columns):
                if col.kind == "numeric":
                    typed.append(float(row[i]))
                else:
                    typed.append(str(row[i]))
            cls = label_class(schema.dataset_id, str(row[label_i]))
            if cls is None:
                raise ConfigError(f"unknown label value {row[label_i]!r}")
            rows.append(typed)
            labels.append(cls)
        return schema, rows, labels

    def fit(self, X, y=None):
        schema, rows, labels = self._split(X)
        self.encoder_model_ = fit_encoder(schema, rows, labels)
        self.width_ = self.encoder_model_.width
        self.classes_ = list(self.encoder_model_.class_names)
        return self

    def transform(self, X):
        check_is_fitted(self, "encoder_model_")
        schema, rows, labels = self._split(X)
        return apply_encoder(self.encoder_model_, schema, rows, labels).features

    def encode_labels(self, X) -> np.ndarray:
        _, _, labels = self._split(X)
        return np.asarray(labels)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "encoder_model_")
        return np.asarray(self.encoder_model_.feature_names, dtype=object)
