"""Acceptance criteria, one test per criterion.

Run with ``pytest tests/test_acceptance.py -s`` to see one line per
criterion. Each test pins the criterion's tolerance and runtime budget.
"""

import time

import numpy as np
import pytest

from ctxrel.cli import main
from ctxrel.corpus import Token, parse_stroke_table, word_stroke_count
from ctxrel.embeddings import EmbeddingTable
from ctxrel.gam import (
    LambdaSearch,
    fit_penalized,
    gaussian_aic,
    smooth_term,
)
from ctxrel.pipeline import RELEVANCE_METRICS, rank_metrics, run_study
from ctxrel.pipeline import ComparisonResult
from ctxrel.relevance import (
    PROXIMITY_WEIGHTS,
    UNIFORM_WEIGHTS,
    annotate_corpus,
    build_window,
    metric_attention,
    metric_cosine_context,
    metric_dynamic,
)
from synth import (
    generator_corpus,
    random_corpus,
    toy_vocabulary,
    write_corpus_file,
    write_embeddings_file,
    write_strokes_file,
)
from test_gam import brute_force_solve
from test_relevance import naive_metrics


class _Budget:
    def __init__(self, number, description, seconds):
        self.number = number
        self.description = description
        self.seconds = seconds

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        status = "PASS" if exc_type is None else "FAIL"
        print(f"criterion {self.number}: {status} ({elapsed:.2f}s) - {self.description}")
        if exc_type is None:
            assert elapsed < self.seconds, (
                f"criterion {self.number} exceeded its {self.seconds}s budget: {elapsed:.2f}s"
            )
        return False


def test_criterion_1_weight_fixed_point():
    with _Budget(1, "weighted window sum = 10/3, unweighted = 6", 1.0):
        # a unit basis vector makes every pair cosine exactly 1.0
        table = EmbeddingTable(3, {"w": np.array([1.0, 0.0, 0.0])})
        sentence = [
            Token(surface="w", sentence_id="s", position=i + 1, experiment_id="e")
            for i in range(6)
        ]
        window = build_window(sentence, 5, table)
        weighted = metric_attention(window, "cosine", PROXIMITY_WEIGHTS)
        unweighted = metric_attention(window, "cosine", UNIFORM_WEIGHTS)
        assert weighted == pytest.approx(10.0 / 3.0, abs=1e-12)
        assert unweighted == 6.0


def test_criterion_2_reduction_identities():
    with _Budget(2, "attention(uniform) - dynamic == following-pair value", 5.0):
        rng = np.random.default_rng(2024)
        words, table, _ = toy_vocabulary(rng, n_words=10, dim=4)
        corpus = random_corpus(rng, words, n_sentences=1000)
        checked = 0
        for _, sentence in corpus.sentences:
            sentence = list(sentence)
            for token in sentence:
                window = build_window(sentence, token.position, table)
                uniform = metric_attention(window, "cosine", UNIFORM_WEIGHTS)
                dynamic = metric_dynamic(window, "cosine")
                if window.following is not None:
                    follow = float(
                        np.dot(window.target_vector, window.following[2])
                        / (np.linalg.norm(window.target_vector)
                           * np.linalg.norm(window.following[2]))
                    )
                    assert uniform - (dynamic or 0.0) == pytest.approx(follow, abs=1e-12)
                elif dynamic is None:
                    assert uniform is None
                else:
                    assert uniform - dynamic == pytest.approx(0.0, abs=1e-12)
                checked += 1
        assert checked == corpus.token_count


def test_criterion_3_metric_oracle_equivalence():
    with _Budget(3, "all four metrics match the naive pair-loop oracle", 5.0):
        rng = np.random.default_rng(2024)
        words, table, _ = toy_vocabulary(rng, n_words=10, dim=4)
        corpus = random_corpus(rng, words, n_sentences=1000)
        for _, sentence in corpus.sentences:
            sentence = list(sentence)
            for token in sentence:
                window = build_window(sentence, token.position, table)
                got = {
                    "cosine_context": metric_cosine_context(window),
                    "dynamic_rel": metric_dynamic(window),
                    "attn_unweighted": metric_attention(window, "cosine", UNIFORM_WEIGHTS),
                    "attn_weighted": metric_attention(window, "cosine", PROXIMITY_WEIGHTS),
                }
                expected = naive_metrics(sentence, token.position, table)
                for name in got:
                    if expected[name] is None:
                        assert got[name] is None
                    else:
                        assert got[name] == pytest.approx(expected[name], abs=1e-12)


def test_criterion_4_stroke_counts():
    with _Budget(4, "苹果=16, 吃=6, additivity on 100 concatenations", 1.0):
        table = parse_stroke_table("苹\t8\n果\t8\n吃\t6\n我\t7\n很\t9\n".encode())
        assert word_stroke_count("苹果", table) == 16
        assert word_stroke_count("吃", table) == 6
        rng = np.random.default_rng(4)
        chars = list(table.counts)
        for _ in range(100):
            a = "".join(rng.choice(chars, size=rng.integers(1, 5)))
            b = "".join(rng.choice(chars, size=rng.integers(1, 5)))
            assert word_stroke_count(a + b, table) == (
                word_stroke_count(a, table) + word_stroke_count(b, table)
            )


def test_criterion_5_solver_oracle():
    with _Budget(5, "25 penalized fits match brute-force solve; AIC(10,10,2)=6", 10.0):
        assert gaussian_aic(10, 10.0, 2.0) == 6.0
        rng = np.random.default_rng(55)
        from ctxrel.gam import random_intercept_term

        for trial in range(25):
            n = int(rng.integers(30, 51))
            k = int(rng.integers(5, 9))
            terms = [smooth_term(rng.uniform(0, 1, n), k=k, label="s1")]
            if trial % 3 == 0:
                terms.append(smooth_term(rng.uniform(-1, 1, n), k=k, label="s2"))
            if trial % 4 == 0:
                terms.append(random_intercept_term(
                    [str(v) for v in rng.integers(0, 3, n)], label="re"))
            y = rng.normal(0, 1, n)
            n_pen = sum(len(t.penalties) for t in terms)
            lambdas = tuple(float(v) for v in rng.uniform(0.01, 100.0, n_pen))
            fit = fit_penalized(y, terms, LambdaSearch(fixed=lambdas))
            beta, _, _ = brute_force_solve(terms, y, lambdas)
            np.testing.assert_allclose(fit.coefficients, beta, atol=1e-8)


def test_criterion_6_smooth_recovery():
    with _Budget(6, "sin recovery RMSE < 0.1; linear data exact for any lambda", 10.0):
        rng = np.random.default_rng(66)
        x = np.sort(rng.uniform(-3, 3, 500))
        y = np.sin(x) + rng.normal(0, 0.2, 500)
        fit = fit_penalized(y, [smooth_term(x, k=10)])
        rmse = float(np.sqrt(np.mean((fit.fitted_values - np.sin(x)) ** 2)))
        assert rmse < 0.1

        x_lin = np.sort(rng.uniform(0, 1, 200))
        y_lin = -1.0 + 4.0 * x_lin
        for lam in (1e-4, 1e-1, 1.0, 1e2, 1e6):
            fit = fit_penalized(y_lin, [smooth_term(x_lin, k=10)],
                                LambdaSearch(fixed=(lam,)))
            assert fit.rss < 1e-12


def test_criterion_7_protocol_recovery():
    with _Budget(7, "generated effect recovered: signs, ranking, curve shape", 120.0):
        all_negative = 0
        ranked_first = 0
        curve_decreasing = 0
        seeds = range(20)
        for seed in seeds:
            corpus, table, strokes = generator_corpus(seed=1000 + seed, n_sentences=500)
            records, _ = annotate_corpus(corpus, table, strokes)
            study = run_study(records, metric_names=list(RELEVANCE_METRICS),
                              response_names=["log_first"])
            results = study.comparisons
            if all(r.delta_aic < 0 for r in results):
                all_negative += 1
            if rank_metrics(results)[0] == "attn_weighted":
                ranked_first += 1
            grid, values = study.curves[("attn_weighted", "log_first")]
            lo, hi = len(grid) // 10, len(grid) - len(grid) // 10
            if np.all(np.diff(values[lo:hi]) < 0):
                curve_decreasing += 1
        assert all_negative == len(seeds)
        assert ranked_first >= 19
        assert curve_decreasing >= 19


def test_criterion_8_ranking_fixed_point():
    with _Budget(8, "published first-duration deltas rank as reported", 1.0):
        def result(name, delta):
            return ComparisonResult(
                metric_name=name, response_name="log_first", n_used=76727,
                aic_base=0.0, aic_full=delta, delta_aic=delta,
                metric_edf=2.0, metric_significant=True,
            )

        results = [
            result("cosine_context", -31.0),
            result("dynamic_rel", -84.6),
            result("attn_unweighted", -119.0),
            result("attn_weighted", -167.2),
        ]
        assert rank_metrics(results) == [
            "attn_weighted", "attn_unweighted", "dynamic_rel", "cosine_context",
        ]


def test_criterion_9_pipeline_determinism(tmp_path):
    with _Budget(9, "two full CLI runs produce byte-identical outputs", 60.0):
        corpus, table, strokes = generator_corpus(seed=99, n_sentences=120)
        write_embeddings_file(tmp_path / "embeddings.txt", table)
        write_corpus_file(tmp_path / "corpus.tsv", corpus)
        write_strokes_file(tmp_path / "strokes.tsv", strokes)

        outputs = []
        for run in ("one", "two"):
            run_dir = tmp_path / run
            run_dir.mkdir()
            assert main([
                "strokes",
                "--corpus", str(tmp_path / "corpus.tsv"),
                "--strokes-table", str(tmp_path / "strokes.tsv"),
                "--out", str(run_dir / "with_strokes.tsv"),
            ]) == 0
            assert main([
                "annotate",
                "--embeddings", str(tmp_path / "embeddings.txt"),
                "--corpus", str(tmp_path / "corpus.tsv"),
                "--strokes-table", str(tmp_path / "strokes.tsv"),
                "--out", str(run_dir / "metrics.csv"),
            ]) == 0
            assert main([
                "analyze",
                "--metrics-csv", str(run_dir / "metrics.csv"),
                "--out", str(run_dir / "report"),
                "--seed", "99",
            ]) == 0
            files = {
                p.relative_to(run_dir): p.read_bytes()
                for p in sorted(run_dir.rglob("*"))
                if p.is_file() and p.suffix in (".csv", ".svg", ".tsv")
            }
            outputs.append(files)

        assert outputs[0].keys() == outputs[1].keys()
        for name in outputs[0]:
            assert outputs[0][name] == outputs[1][name], f"{name} differs between runs"
        assert any(str(n).endswith(".svg") for n in outputs[0])
        assert any(str(n).endswith(".csv") for n in outputs[0])
