"""Scikit-learn style front door to the whole pipeline.

``GlyphCorrector`` is a fit/predict estimator: ``fit`` trains the counter,
decoder and fetcher on images of well-formed characters, ``predict`` returns
assessment verdicts with correction candidates, and ``get_params`` /
``set_params`` / ``clone`` behave as sklearn expects.  The vocabulary and the
dictionary of well-formed sequences are passed as constructor parameters.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .grammar import IDSDictionary, SymbolVocabulary
from .inference import Verdict, assess, batched_decode
from .model import ModelConfig, build_params, load_model, save_model
from .training import SequenceDataset, TrainConfig, fit, sequence_dacc
from .validation import check_images, check_targets


class GlyphCorrector(BaseEstimator):
    """Counting-aware decomposition, misspelling detection and correction.

    Parameters mirror the model and training knobs; the ablation switches
    (`use_count_vector`, `use_attention_reg`, `use_reweight`,
    `two_step_counting`) toggle the counting vector in the decoder, the
    attention-coupling loss, test-time re-weighting, and the two-step
    counting head.
    """

    def __init__(self, vocabulary: SymbolVocabulary | None = None,
                 dictionary: IDSDictionary | None = None,
                 image_size: int = 64, enc_channels: tuple = (32, 64, 128),
                 proto_dim: int = 256, count_kernel: int = 8, state_dim: int = 256,
                 embed_dim: int = 256, attn_dim: int = 256,
                 coverage_channels: int = 128, coverage_kernel: int = 11,
                 g_dim: int = 256, fetch_key_dim: int = 128, fetch_char_dim: int = 256,
                 drop_prob: float = 0.3, end_count: float = 10.0,
                 max_decode_len: int = 64, use_count_vector: bool = True,
                 two_step_counting: bool = True, use_attention_reg: bool = True,
                 use_reweight: bool = True, lambda_count: float = 1.0,
                 lambda_decode: float = 1.0, lambda_fetch: float = 1.0,
                 lambda_reg: float = 0.5, reg_temperature: float = 0.2,
                 rho: float = 0.95, adadelta_eps: float = 1e-6,
                 count_source: str = "counter", batch_size: int = 32,
                 epochs: int = 30, val_every: int = 1, seed: int = 0,
                 dtype: str = "float32", topk: int = 5, eval_batch: int = 64,
                 verbose: bool = False):
        self.vocabulary = vocabulary
        self.dictionary = dictionary
        self.image_size = image_size
        self.enc_channels = enc_channels
        self.proto_dim = proto_dim
        self.count_kernel = count_kernel
        self.state_dim = state_dim
        self.embed_dim = embed_dim
        self.attn_dim = attn_dim
        self.coverage_channels = coverage_channels
        self.coverage_kernel = coverage_kernel
        self.g_dim = g_dim
        self.fetch_key_dim = fetch_key_dim
        self.fetch_char_dim = fetch_char_dim
        self.drop_prob = drop_prob
        self.end_count = end_count
        self.max_decode_len = max_decode_len
        self.use_count_vector = use_count_vector
        self.two_step_counting = two_step_counting
        self.use_attention_reg = use_attention_reg
        self.use_reweight = use_reweight
        self.lambda_count = lambda_count
        self.lambda_decode = lambda_decode
        self.lambda_fetch = lambda_fetch
        self.lambda_reg = lambda_reg
        self.reg_temperature = reg_temperature
        self.rho = rho
        self.adadelta_eps = adadelta_eps
        self.count_source = count_source
        self.batch_size = batch_size
        self.epochs = epochs
        self.val_every = val_every
        self.seed = seed
        self.dtype = dtype
        self.topk = topk
        self.eval_batch = eval_batch
        self.verbose = verbose

    # -- config assembly ----------------------------------------------------
    def _require_language(self):
        if self.vocabulary is None or self.dictionary is None:
            raise ValueError("vocabulary and dictionary must be provided")
        return self.vocabulary, self.dictionary

    def _model_config(self) -> ModelConfig:
        vocab, dictionary = self._require_language()
        return ModelConfig(
            num_symbols=len(vocab), num_classes=len(dictionary),
            image_size=self.image_size, enc_channels=tuple(self.enc_channels),
            proto_dim=self.proto_dim, count_kernel=self.count_kernel,
            state_dim=self.state_dim, embed_dim=self.embed_dim,
            attn_dim=self.attn_dim, coverage_channels=self.coverage_channels,
            coverage_kernel=self.coverage_kernel, g_dim=self.g_dim,
            fetch_key_dim=self.fetch_key_dim, fetch_char_dim=self.fetch_char_dim,
            drop_prob=self.drop_prob, end_count=self.end_count,
            max_decode_len=self.max_decode_len,
            use_count_vector=self.use_count_vector,
            two_step_counting=self.two_step_counting, dtype=self.dtype)

    def _train_config(self) -> TrainConfig:
        return TrainConfig(
            lambda_count=self.lambda_count, lambda_decode=self.lambda_decode,
            lambda_fetch=self.lambda_fetch, lambda_reg=self.lambda_reg,
            reg_temperature=self.reg_temperature, rho=self.rho,
            eps=self.adadelta_eps, batch_size=self.batch_size,
            epochs=self.epochs, seed=self.seed, val_every=self.val_every,
            val_reweight=self.use_reweight,
            use_attention_reg=self.use_attention_reg,
            count_source=self.count_source, verbose=self.verbose)

    # -- estimator API --------------------------------------------------------
    def fit(self, X, y, X_val=None, y_val=None, history_path=None):
        """Train on images ``X`` and targets ``y`` of (tokens, class) pairs.

        An optional validation set drives checkpoint selection by exact
        decomposition accuracy; otherwise the final parameters are kept.
        """
        vocab, dictionary = self._require_language()
        X = check_images(X, self.image_size)
        tokens, classes = check_targets(y, len(X), len(vocab), len(dictionary))
        train = SequenceDataset.build(np.rint(X * 255).astype(np.uint8),
                                      tokens, classes, len(vocab))
        val = None
        if X_val is not None:
            X_val = check_images(X_val, self.image_size)
            vtokens, vclasses = check_targets(y_val, len(X_val), len(vocab), len(dictionary))
            val = SequenceDataset.build(np.rint(X_val * 255).astype(np.uint8),
                                        vtokens, vclasses, len(vocab))
        params = build_params(self._model_config(), seed=self.seed)
        result = fit(params, self._train_config(), train, val, history_path=history_path)
        params.load_values(result.best_values)
        self.params_ = params
        self.history_ = result.history
        self.val_history_ = result.val_history
        self.best_val_dacc_ = result.best_val_dacc
        self.best_epoch_ = result.best_epoch
        self.n_iter_ = len(result.history)
        return self

    def decompose(self, X) -> list:
        """Greedy decompositions as token-id lists (end token stripped)."""
        check_is_fitted(self, "params_")
        X = check_images(X, self.image_size)
        out = batched_decode(self.params_, X.astype(np.dtype(self.dtype)),
                             batch_size=self.eval_batch,
                             use_reweight=self.use_reweight)
        return out.tokens

    def predict(self, X) -> list[Verdict]:
        """Assessment verdicts with correction candidates per image."""
        check_is_fitted(self, "params_")
        vocab, dictionary = self._require_language()
        X = check_images(X, self.image_size)
        return [assess(img, self.params_, dictionary, vocab,
                       use_reweight=self.use_reweight, topk=self.topk)
                for img in X]

    def predict_counts(self, X) -> np.ndarray:
        """Raw per-symbol count predictions (n, N)."""
        check_is_fitted(self, "params_")
        X = check_images(X, self.image_size)
        out = batched_decode(self.params_, X.astype(np.dtype(self.dtype)),
                             batch_size=self.eval_batch,
                             use_reweight=self.use_reweight)
        return out.counts

    def score(self, X, y) -> float:
        """Exact-sequence decomposition accuracy."""
        truth = [list(item[0]) if isinstance(item, tuple) else list(item) for item in y]
        return sequence_dacc(self.decompose(X), truth)

    # -- persistence ----------------------------------------------------------
    def save(self, path) -> None:
        check_is_fitted(self, "params_")
        save_model(path, self.params_)

    def load_checkpoint(self, path) -> "GlyphCorrector":
        """Attach trained parameters from a checkpoint (config must agree)."""
        self._require_language()
        params = load_model(path)
        expect = self._model_config()
        if params.config != expect:
            raise ValueError("checkpoint config does not match estimator parameters")
        self.params_ = params
        return self
