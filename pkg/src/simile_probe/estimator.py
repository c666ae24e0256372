"""scikit-learn style wrappers around the completion pipeline."""

from __future__ import annotations

from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import metrics
from .completion import (
    EmbeddingTable,
    check_pattern_ids,
    complete,
    derive_threshold,
    filter_vehicles,
    pattern_search,
)
from .patterns import DEFAULT_REGISTRY, applicable_patterns
from .validation import check_k, check_ks, check_pairs, check_task, check_triples


class VehicleFilter(TransformerMixin, BaseEstimator):
    """Remove predicted vehicles that are near-synonyms of the tenor.

    Parameters
    ----------
    embeddings : EmbeddingTable
    threshold : float or None
        Cosine cut-off. ``None`` derives it in :meth:`fit` as the largest
        tenor-vehicle similarity among the training pairs.
    """

    def __init__(self, embeddings=None, threshold=None):
        self.embeddings = embeddings
        self.threshold = threshold

    def fit(self, X=None, y=None):
        if not isinstance(self.embeddings, EmbeddingTable):
            raise TypeError("embeddings must be an EmbeddingTable")
        if self.threshold is None:
            self.threshold_ = derive_threshold(check_pairs(X), self.embeddings)
        else:
            self.threshold_ = float(self.threshold)
        return self

    def transform(self, X):
        """``X`` is a sequence of ``(tenor, candidates)``; returns filtered lists."""
        check_is_fitted(self, "threshold_")
        return [filter_vehicles(tenor, cands, self.embeddings, self.threshold_) for tenor, cands in X]


class SimileCompleter(BaseEstimator):
    """Complete simile triples by probing a masked language model.

    Parameters
    ----------
    model : ModelRef or backend
    task : {"SI", "SG"}
    vocab : TaskVocabulary
        Candidate words for the missing slot.
    patterns : "search", "all" or iterable of pattern ids
        ``"search"`` picks the best subset on the training pairs in :meth:`fit`.
    k : int
        Length of each prediction list.
    objective : str
        ``"MRR"`` or ``"R@K"``, used by the search.
    ks : tuple of int
        Cut-offs reported by the search and by :meth:`evaluate`.
    synonyms : SynonymProvider
    mrr_synonyms : bool
        Whether MRR also accepts synonyms of the gold words.
    vehicle_filter : VehicleFilter or None
        Applied to SG predictions before truncation.
    workers : int
    """

    def __init__(self, model=None, task="SI", vocab=None, patterns="all", k=10, objective="MRR",
                 ks=metrics.DEFAULT_KS, synonyms=None, mrr_synonyms=True, vehicle_filter=None, workers=1):
        self.model = model
        self.task = task
        self.vocab = vocab
        self.patterns = patterns
        self.k = k
        self.objective = objective
        self.ks = ks
        self.synonyms = synonyms
        self.mrr_synonyms = mrr_synonyms
        self.vehicle_filter = vehicle_filter
        self.workers = workers

    def _synonyms(self):
        return self.synonyms if self.synonyms is not None else metrics.IDENTITY

    def fit(self, X=None, y=None):
        """Resolve the pattern set; with ``patterns="search"`` run the subset search on ``X``."""
        task = check_task(self.task)
        check_k(self.k)
        if self.vocab is None or self.model is None:
            raise ValueError("model and vocab are required")
        if self.patterns == "search":
            report = pattern_search(self.model, check_pairs(X), task, self.vocab, self.objective,
                                    ks=check_ks(self.ks), synonyms=self._synonyms(), mrr_synonyms=self.mrr_synonyms,
                                    workers=self.workers)
            self.search_report_ = report
            self.pattern_set_ = tuple(report.best)
        elif self.patterns == "all":
            self.pattern_set_ = tuple(p.id for p in applicable_patterns(task))
        else:
            self.pattern_set_ = check_pattern_ids(self.patterns, task)
        if self.vehicle_filter is not None and not hasattr(self.vehicle_filter, "threshold_"):
            self.vehicle_filter.fit(X)
        self.task_ = task
        return self

    def _complete(self, triple, k, with_scores=False):
        vf = self.vehicle_filter
        return complete(self.model, triple, self.pattern_set_, self.vocab, k,
                        embeddings=vf.embeddings if vf is not None else None,
                        threshold=vf.threshold_ if vf is not None else 0.48,
                        registry=DEFAULT_REGISTRY, with_scores=with_scores)

    def predict(self, X):
        """Ranked top-``k`` words for each incomplete triple in ``X``."""
        check_is_fitted(self, "pattern_set_")
        return [self._complete(t, self.k) for t in check_triples(X, self.task_)]

    def predict_scores(self, X):
        check_is_fitted(self, "pattern_set_")
        return [self._complete(t, self.k, with_scores=True) for t in check_triples(X, self.task_)]

    def records(self, pairs, depth=None):
        """Evaluation records for ``pairs``; ``depth=None`` ranks the whole vocabulary."""
        check_is_fitted(self, "pattern_set_")
        depth = depth or len(self.vocab)
        out = []
        for pair in check_pairs(pairs):
            for triple, gold in pair.task_items(self.task_):
                preds = self._complete(triple, depth)
                out.append(metrics.EvalRecord(triple, gold, preds, pair))
        return out

    def evaluate(self, pairs):
        """MRR and R@K for each configured K on ``pairs``."""
        return metrics.evaluate(self.records(pairs), check_ks(self.ks), self._synonyms(), self.mrr_synonyms)

    def score(self, X, y=None):
        """MRR on labeled pairs, so higher is better as scikit-learn expects."""
        syn = self._synonyms() if self.mrr_synonyms else metrics.IDENTITY
        return metrics.mrr(self.records(X), syn)
