"""scikit-learn compatible wrappers around the functional core.

These give the network, the sensor windowing, the 1-D clustering and the
cooperation rule the usual ``fit``/``predict``/``transform`` surface, so
they drop into pipelines, ``clone`` and grid searches.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, ClusterMixin, TransformerMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import cluster, dataset, device, model


class CollaborativeMLPClassifier(ClassifierMixin, BaseEstimator):
    """One-hidden-layer (by default) softmax network trained with local SGD rounds.

    Training is exactly what a defecting device does on its own data: ``rounds``
    rounds of ``local_epochs`` shuffled minibatch epochs.
    """

    def __init__(self, hidden_dims=(64,), learning_rate=0.01, batch_size=10,
                 local_epochs=1, rounds=20, random_state=0):
        self.hidden_dims = hidden_dims
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.local_epochs = local_epochs
        self.rounds = rounds
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64)
        check_classification_targets(y)
        self.classes_, encoded = np.unique(y, return_inverse=True)
        n_classes = max(len(self.classes_), 2)
        self.spec_ = model.ModelSpec(X.shape[1], n_classes, tuple(self.hidden_dims))
        self.n_features_in_ = X.shape[1]
        cfg = device.TrainingConfig(self.batch_size, self.local_epochs,
                                    self.learning_rate, self.rounds)
        data = dataset.LabeledDataset(X, encoded, n_classes)
        dev = device.DeviceState(0, data, strategy=device.DF)
        seed = 0 if self.random_state is None else self.random_state
        device.run_solo(self.spec_, dev, cfg, data, seed)
        self.params_ = dev.params
        self.loss_curve_ = list(dev.loss_history)
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X, dtype=np.float64)
        proba = model.forward(self.spec_, self.params_, model.Minibatch(X))
        return proba[:, :len(self.classes_)]

    def predict(self, X):
        proba = self.predict_proba(X)
        return self.classes_[np.argmax(proba, axis=1)]


class SensorWindowTransformer(TransformerMixin, BaseEstimator):
    """ARAS rows (20 sensors + 2 labels) to per-window sensor means."""

    def __init__(self, window_seconds=60, resident=1):
        self.window_seconds = window_seconds
        self.resident = resident

    def _log(self, X):
        X = check_array(X, dtype=np.int64)
        if X.shape[1] != dataset.ARAS_COLUMNS:
            raise ValueError(f"expected {dataset.ARAS_COLUMNS} columns, got {X.shape[1]}")
        return dataset.SensorLog(X)

    def fit(self, X, y=None):
        self._log(X)
        self.n_features_in_ = dataset.ARAS_COLUMNS
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        return dataset.windowize(self._log(X), self.window_seconds, self.resident).features

    def window_labels(self, X):
        """Majority activity per window, 0-based."""
        return dataset.windowize(self._log(X), self.window_seconds, self.resident).labels


class OptimalKMeans1D(ClusterMixin, BaseEstimator):
    """Exact 1-D k-means. ``n_clusters='auto'`` picks k by mean silhouette."""

    def __init__(self, n_clusters=2, k_max=5):
        self.n_clusters = n_clusters
        self.k_max = k_max

    def fit(self, X, y=None):
        X = check_array(np.asarray(X, dtype=np.float64).reshape(len(X), -1))
        if X.shape[1] != 1:
            raise ValueError("OptimalKMeans1D expects a single feature")
        values = dict(enumerate(X[:, 0]))
        k = None if self.n_clusters == "auto" else int(self.n_clusters)
        assignment = cluster.cluster_values(values, k=k, k_max=self.k_max)
        self.assignment_ = assignment
        self.labels_ = np.array([assignment.labels[i] for i in range(len(values))])
        self.cluster_centers_ = np.asarray(assignment.centers).reshape(-1, 1)
        self.inertia_ = assignment.within_cluster_ss
        self.n_clusters_ = assignment.k
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "cluster_centers_")
        X = check_array(np.asarray(X, dtype=np.float64).reshape(len(X), -1))
        return np.abs(X - self.cluster_centers_.T).argmin(axis=1)


class FairStrategySelector(BaseEstimator):
    """Cluster participants' losses; cooperate iff your cluster has company."""

    def __init__(self, n_clusters="auto", k_max=5):
        self.n_clusters = n_clusters
        self.k_max = k_max

    def fit(self, X, y=None):
        km = OptimalKMeans1D(self.n_clusters, self.k_max).fit(X)
        strategies = cluster.fair_strategy(km.assignment_)
        self.clusterer_ = km
        self.strategies_ = np.array([strategies[i] for i in range(len(strategies))])
        self.cooperation_rate_ = float(np.mean(self.strategies_ == cluster.CP))
        return self

    def fit_predict(self, X, y=None):
        return self.fit(X).strategies_
