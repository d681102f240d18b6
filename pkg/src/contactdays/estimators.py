"""scikit-learn style wrappers around the pipeline stages.

These follow the usual estimator contract (constructor only stores
parameters, ``fit`` returns ``self``, learned state ends in ``_``) so they
work with ``get_params``/``set_params``, ``clone`` and pipelines.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .consensus import CLOSE_PAIR_DAYS, analyze_swaps, compute_consensus
from .evaluation import ACCEPTABLE_DAYS, STABILITY_CATEGORIES, accuracy_summary, validation_records
from .extraction import BackendConfig, Document, ExtractionRequest, RunResult, extract, make_backend, protocol_id_for
from .schedule import WINDOWS, ScheduleSpec, Window, count_contact_days, expand_arm_calendar
from .stats import iqr
from .synth import load_truth


def check_runs(runs) -> list[RunResult]:
    """Validate a collection of run results and return it as a list."""
    if isinstance(runs, RunResult):
        runs = [runs]
    runs = list(runs)
    bad = [type(r).__name__ for r in runs if not isinstance(r, RunResult)]
    if bad:
        raise TypeError(f"expected RunResult instances, got {sorted(set(bad))}")
    seen = set()
    for r in runs:
        key = (r.protocol_id, r.run_index)
        if key in seen:
            raise ValueError(f"duplicate run {r.run_index} for protocol {r.protocol_id}")
        seen.add(key)
    return runs


def check_specs(specs) -> list[ScheduleSpec]:
    if isinstance(specs, ScheduleSpec):
        specs = [specs]
    specs = list(specs)
    bad = [type(s).__name__ for s in specs if not isinstance(s, ScheduleSpec)]
    if bad:
        raise TypeError(f"expected ScheduleSpec instances, got {sorted(set(bad))}")
    return specs


class ContactDayCounter(TransformerMixin, BaseEstimator):
    """Ground-truth counts for every arm of every spec.

    ``transform`` returns an integer array of shape (n_arms, n_windows),
    arms in spec order then arm order; ``arm_index_`` lists the matching
    (schedule_id, arm_id) pairs.
    """

    def __init__(self, windows=None):
        self.windows = windows

    def _windows(self):
        return [Window(w) for w in self.windows] if self.windows is not None else list(WINDOWS)

    def fit(self, X, y=None):
        check_specs(X)
        self.windows_ = self._windows()
        return self

    def transform(self, X):
        check_is_fitted(self, "windows_")
        specs = check_specs(X)
        rows, index = [], []
        for spec in specs:
            for arm in spec.arms:
                gt = count_contact_days(expand_arm_calendar(spec, arm))
                rows.append([gt.counts[w] for w in self.windows_])
                index.append((spec.schedule_id, arm.arm_id))
        self.arm_index_ = index
        return np.asarray(rows, dtype=int).reshape(len(rows), len(self.windows_))

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "windows_")
        return np.asarray([w.value for w in self.windows_], dtype=object)


class StabilityClassifier(ClassifierMixin, BaseEstimator):
    """Classifies slots by the IQR of their per-run values.

    ``X`` has one row per slot and one column per run. There is nothing to
    learn; ``fit`` validates input and records ``classes_``.
    """

    def __init__(self, acceptable_within=ACCEPTABLE_DAYS):
        self.acceptable_within = acceptable_within

    def fit(self, X, y=None):
        X = check_array(X, dtype=float)
        if X.shape[1] < 2:
            raise ValueError(f"need at least 2 runs per slot, got {X.shape[1]}")
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.asarray(STABILITY_CATEGORIES, dtype=object)
        return self

    def decision_function(self, X):
        """IQR of each row."""
        check_is_fitted(self, "classes_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} runs per slot, fitted with {self.n_features_in_}")
        return np.asarray([iqr(row) for row in X])

    def predict(self, X):
        spread = self.decision_function(X)
        labels = np.where(spread == 0, "perfect", np.where(spread <= self.acceptable_within, "acceptable", "high_variance"))
        return labels.astype(object)


class PositionalConsensus(TransformerMixin, BaseEstimator):
    """Median consensus over runs matched by within-group rank.

    ``fit`` takes a list of :class:`RunResult`; ``transform`` returns the
    consensus values as a float array (n_slots, n_windows) in slot order
    (``slots_``).
    """

    def __init__(self, close_within=CLOSE_PAIR_DAYS):
        self.close_within = close_within

    def fit(self, X, y=None):
        runs = check_runs(X)
        self.consensus_arms_ = compute_consensus(runs)
        self.slots_ = [(a.protocol_id, a.intervention_type.value, a.pos_idx) for a in self.consensus_arms_]
        self.swap_report_ = analyze_swaps(runs, close_within=self.close_within) if runs else None
        return self

    def transform(self, X):
        """Consensus of ``X``; ``None`` returns the fitted consensus."""
        check_is_fitted(self, "consensus_arms_")
        arms = self.consensus_arms_ if X is None else compute_consensus(check_runs(X))
        return np.asarray([[a.counts[w] for w in WINDOWS] for a in arms], dtype=float).reshape(len(arms), len(WINDOWS))

    def fit_transform(self, X, y=None):
        return self.fit(X).transform(None)

    def get_feature_names_out(self, input_features=None):
        return np.asarray([w.key for w in WINDOWS], dtype=object)


class ScheduleExtractor(BaseEstimator):
    """Runs extraction over documents.

    ``fit`` builds the backend; for the oracle and perturbed backends ``y``
    may carry the schedule specs to answer from (otherwise ``spec.json``
    next to each document is used). ``predict`` returns one
    :class:`RunResult` per (document, run). ``score`` is the within-3-day
    rate against truth files.
    """

    def __init__(
        self,
        backend_kind="oracle",
        architecture="vanilla",
        model_id="gemini-3-flash-preview",
        temperature=0.1,
        max_retries=3,
        backoff_base=2.0,
        noise=0,
        mangle_names=False,
        seed=0,
        n_runs=1,
    ):
        self.backend_kind = backend_kind
        self.architecture = architecture
        self.model_id = model_id
        self.temperature = temperature
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.noise = noise
        self.mangle_names = mangle_names
        self.seed = seed
        self.n_runs = n_runs

    def _config(self):
        return BackendConfig(
            backend_kind=self.backend_kind,
            model_id=self.model_id,
            temperature=self.temperature,
            max_retries=self.max_retries,
            backoff_base=self.backoff_base,
            noise=self.noise,
            mangle_names=self.mangle_names,
            seed=self.seed,
        ).validate()

    def fit(self, X=None, y=None, **backend_kwargs):
        if self.n_runs < 1:
            raise ValueError("n_runs must be >= 1")
        self.config_ = self._config()
        specs = {s.schedule_id: s for s in check_specs(y)} if y is not None else None
        self.backend_ = make_backend(self.config_, specs, **backend_kwargs)
        return self

    def predict(self, X):
        check_is_fitted(self, "backend_")
        results = []
        for path in X:
            doc = Document.load(path)
            pid = protocol_id_for(path)
            for k in range(self.n_runs):
                req = ExtractionRequest(doc, pid, self.config_, self.architecture, run_index=k)
                results.append(extract(req, self.backend_))
        return results

    def score(self, X, y, sample_weight=None):
        """Within-3-day rate; ``y`` holds truth file paths aligned with ``X``."""
        records = []
        truths = {protocol_id_for(p): load_truth(t) for p, t in zip(X, y)}
        for run in self.predict(X):
            records += validation_records(run, truths[run.protocol_id])[0]
        return accuracy_summary(records)["within_3"]
