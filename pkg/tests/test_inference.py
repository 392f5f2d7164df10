import numpy as np
import pytest

from sketchlm.canvas import apply_strokes, blank_canvas
from sketchlm.codec import TAG_RESPONSE_CLOSE, serialize_stroke, split_words
from sketchlm.dataset import BuildConfig, build_dataset
from sketchlm.evaluation import ReplayStream, oracle_streams, response_token_words
from sketchlm.inference import (
    Budgets,
    Done,
    Greedy,
    Session,
    StrokeEmitted,
    TextToken,
    TopP,
    classify,
    run_command,
    sample_token,
)
from sketchlm.templates import TaskKind
from sketchlm.codec import build_vocab
from sketchlm.trainer import build_training_vocab


def logits_for(probs):
    return np.log(np.asarray(probs, np.float64))


class TestSampleToken:
    def test_greedy_argmax(self):
        assert sample_token(logits_for([0.5, 0.3, 0.15, 0.05]), Greedy()) == 0

    def test_greedy_tie_lowest_id(self):
        assert sample_token(np.array([1.0, 3.0, 3.0, 0.0]), Greedy()) == 1

    def test_nucleus_boundary_inclusion(self):
        kept, renorm = TopP(0.9).nucleus(logits_for([0.5, 0.3, 0.15, 0.05]))
        assert sorted(kept.tolist()) == [0, 1, 2]
        assert renorm.sum() == pytest.approx(1.0)

    def test_nucleus_tiny_p_keeps_top_token(self):
        kept, _ = TopP(0.01).nucleus(logits_for([0.5, 0.3, 0.15, 0.05]))
        assert kept.tolist() == [0]

    def test_sampled_tokens_stay_in_nucleus(self):
        policy = TopP(0.9, seed=7)
        logits = logits_for([0.5, 0.3, 0.15, 0.05])
        for _ in range(500):
            assert sample_token(logits, policy) in (0, 1, 2)

    def test_same_seed_same_stream(self):
        logits = logits_for([0.4, 0.3, 0.2, 0.1])
        p1, p2 = TopP(1.0, seed=3), TopP(1.0, seed=3)
        seq1 = [sample_token(logits, p1) for _ in range(50)]
        seq2 = [sample_token(logits, p2) for _ in range(50)]
        assert seq1 == seq2

    def test_full_distribution_statistics(self):
        # p=1.0 keeps every token; empirical frequencies within 3 sigma
        probs = np.array([0.4, 0.3, 0.2, 0.1])
        policy = TopP(1.0, seed=12)
        logits = logits_for(probs)
        n = 100_000
        draws = np.array([sample_token(logits, policy) for _ in range(n)])
        for tok, p in enumerate(probs):
            freq = (draws == tok).mean()
            sigma = (p * (1 - p) / n) ** 0.5
            assert abs(freq - p) < 3 * sigma + 1e-12

    def test_invalid_p(self):
        with pytest.raises(ValueError):
            TopP(0.0)
        with pytest.raises(ValueError):
            TopP(1.5)


def _sample_of(task, seed=5):
    cfg = BuildConfig(classes=("circle", "square", "triangle"), samples=40, seed=seed,
                      relationship_fraction=0.0)
    for s in build_dataset(cfg):
        if s.task is task and s.response_strokes:
            return s
    raise AssertionError("no sample found")


class TestRunCommand:
    def test_replay_emits_all_strokes_and_matches_gt(self):
        s = _sample_of(TaskKind.GENERATE_ALL)
        vocab = build_training_vocab([s], None)
        session = Session(canvas=s.start_canvas())
        events = list(run_command(session, s.command_text, ReplayStream.for_sample(s, vocab),
                                  vocab, prompt_canvas=s.prompt_canvas()))
        strokes = [e.stroke for e in events if isinstance(e, StrokeEmitted)]
        assert tuple(strokes) == s.response_strokes
        assert events[-1] == Done("response-end")
        assert (session.canvas == s.gt_canvas()).all()

    def test_canvas_consistency_invariant(self):
        s = _sample_of(TaskKind.REMOVE_ALL)
        vocab = build_training_vocab([s], None)
        start = s.start_canvas()
        session = Session(canvas=start.copy())
        list(run_command(session, s.command_text, ReplayStream.for_sample(s, vocab), vocab))
        replay = apply_strokes(start, session.strokes_applied)
        assert (replay == session.canvas).all()

    def test_immediate_response_end(self):
        vocab = build_vocab(["Draw a circle"])
        stream = ReplayStream([vocab.response_end_id], vocab)
        session = Session()
        events = list(run_command(session, "Draw a circle", stream, vocab))
        assert events == [Done("response-end")]
        assert (session.canvas == blank_canvas()).all()

    def test_text_only_command_keeps_canvas(self):
        vocab = build_vocab(["What is the class of this sketch", "a circle"])
        script = [vocab.id_of(w) for w in ["a", "circle", TAG_RESPONSE_CLOSE]]
        session = Session()
        before = session.canvas.copy()
        events = list(run_command(session, "What is the class of this sketch",
                                  ReplayStream(script, vocab), vocab))
        words = [e.word for e in events if isinstance(e, TextToken)]
        assert words == ["a", "circle"]
        assert events[-1] == Done("response-end")
        assert (session.canvas == before).all()

    def test_max_tokens_budget(self):
        vocab = build_vocab(["loop forever"])

        class LoopStream:
            def append(self, tid, image=None):
                logits = np.full(len(vocab), -1e9, np.float32)
                logits[vocab.id_of("forever")] = 0.0
                return logits

        session = Session(budgets=Budgets(max_tokens=25, max_strokes=4))
        events = list(run_command(session, "loop", LoopStream(), vocab))
        assert events[-1] == Done("max-tokens")
        assert sum(isinstance(e, TextToken) for e in events) == 25

    def test_max_strokes_budget(self):
        s = _sample_of(TaskKind.GENERATE_ALL)
        assert len(s.response_strokes) >= 2
        vocab = build_training_vocab([s], None)
        session = Session(canvas=s.start_canvas(), budgets=Budgets(max_strokes=1))
        events = list(run_command(session, s.command_text, ReplayStream.for_sample(s, vocab),
                                  vocab, prompt_canvas=s.prompt_canvas()))
        assert events[-1] == Done("max-strokes")
        assert sum(isinstance(e, StrokeEmitted) for e in events) == 1

    def test_malformed_stroke_dropped_and_loop_continues(self):
        good = _sample_of(TaskKind.GENERATE_ALL)
        from sketchlm.trainer import sample_text

        vocab = build_vocab([sample_text(good), "Draw a circle"])
        stroke = good.response_strokes[0]
        bad_words = ["<stroke>", "width"]  # grammar violation after the open tag
        good_words = split_words(serialize_stroke(stroke))
        script = [vocab.id_of(w) for w in (*bad_words, *good_words, TAG_RESPONSE_CLOSE)]
        session = Session()
        events = list(run_command(session, "Draw a circle", ReplayStream(script, vocab), vocab))
        strokes = [e.stroke for e in events if isinstance(e, StrokeEmitted)]
        assert strokes == [stroke]
        assert events[-1] == Done("response-end")
        assert (session.canvas == apply_strokes(blank_canvas(), [stroke])).all()

    def test_cancel(self):
        vocab = build_vocab(["x y z"])

        class LoopStream:
            def append(self, tid, image=None):
                logits = np.full(len(vocab), -1e9, np.float32)
                logits[vocab.id_of("x")] = 0.0
                return logits

        session = Session()
        gen = run_command(session, "x", LoopStream(), vocab)
        first = next(gen)
        assert isinstance(first, TextToken)
        session.cancel_requested = True
        rest = list(gen)
        assert rest[-1] == Done("cancelled")


class TestClassify:
    def test_returns_joined_words(self):
        vocab = build_vocab(["What is this", "a tree"])
        script = [vocab.id_of(w) for w in ["a", "tree", TAG_RESPONSE_CLOSE]]
        session = Session()
        out = classify(session, "What is this", ReplayStream(script, vocab), vocab)
        assert out == "a tree"

    def test_empty_generation_gives_empty_string(self):
        vocab = build_vocab(["What is this"])
        stream = ReplayStream([vocab.response_end_id], vocab)
        assert classify(Session(), "What is this", stream, vocab) == ""
