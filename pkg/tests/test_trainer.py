import numpy as np
import pytest

from sketchlm.canvas import BBox
from sketchlm.codec import PLACEHOLDER_TOKEN, TAG_RESPONSE_CLOSE, split_words
from sketchlm.dataset import BuildConfig, Sample, build_dataset, write_dataset
from sketchlm.model import ContextOverflow, ModelConfig, load_checkpoint
from sketchlm.templates import TaskKind
from sketchlm.trainer import (
    TrainConfig,
    build_training_vocab,
    load_text_corpus,
    sample_text,
    sample_to_sequence,
    train,
)


def small_dataset(samples=16, seed=5, tasks=tuple(TaskKind)):
    cfg = BuildConfig(
        classes=("circle", "square", "triangle"),
        samples=samples,
        seed=seed,
        tasks=tasks,
        relationship_fraction=0.0,
    )
    return build_dataset(cfg)


def tiny_model_cfg(**kw):
    base = dict(vocab_size=0, n_layers=2, hidden_dim=32, n_heads=4, ctx_len=512,
                image_grid=4, feat_dim=8, pos_dim=8, encoder_channels=(4, 6, 8))
    base.update(kw)
    return ModelConfig(**base)


class TestSampleToSequence:
    def _classification_sample(self):
        return Sample(
            task=TaskKind.CLASSIFICATION,
            command_text="What is the class of this sketch",
            response_text="a tree",
            prompt_strokes=(),
            response_strokes=(),
            start_on_blank=False,
            seed=0,
        )

    def test_classification_mask_covers_answer_only(self):
        s = self._classification_sample()
        vocab = build_training_vocab([s], None)
        seq, targets, mask = sample_to_sequence(s, vocab, 64)
        scored = [vocab.word_of(t) for t, m in zip(targets, mask) if m]
        assert scored == ["a", "tree", TAG_RESPONSE_CLOSE]

    def test_mask_never_hits_placeholders(self):
        for s in small_dataset(12):
            vocab = build_training_vocab([s], None)
            seq, _, mask = sample_to_sequence(s, vocab, 640)
            for pos, _ in seq.placeholder_positions:
                assert not mask[pos]

    def test_placeholder_count_is_one_plus_strokes(self):
        for s in small_dataset(12):
            if s.task is TaskKind.CLASSIFICATION:
                continue
            vocab = build_training_vocab([s], None)
            seq, _, _ = sample_to_sequence(s, vocab, 640)
            assert len(seq.images) == 1 + len(s.response_strokes)

    def test_images_align_with_feedback(self):
        s = next(x for x in small_dataset(24) if x.task is TaskKind.GENERATE_ALL and x.response_strokes)
        vocab = build_training_vocab([s], None)
        seq, _, _ = sample_to_sequence(s, vocab, 640)
        fb = s.feedback_canvases()
        assert (seq.images[0] == s.prompt_canvas()).all()
        for i, c in enumerate(fb):
            assert (seq.images[1 + i] == c).all()

    def test_context_overflow(self):
        s = small_dataset(4)[0]
        vocab = build_training_vocab([s], None)
        with pytest.raises(ContextOverflow):
            sample_to_sequence(s, vocab, 8)

    def test_sample_text_tokenizes_cleanly(self):
        samples = small_dataset(12)
        vocab = build_training_vocab(samples, None)
        for s in samples:
            for w in split_words(sample_text(s)):
                vocab.id_of(w)


class TestTrainLoop:
    def _train(self, tmp_path, tag, steps=6, seed=3, mix=0.0, corpus=None, resume=None):
        samples_dir = tmp_path / "data"
        if not (samples_dir / "samples.jsonl").exists():
            write_dataset(
                BuildConfig(classes=("circle", "square"), samples=10, seed=7,
                            relationship_fraction=0.0),
                samples_dir,
            )
        tc = TrainConfig(
            dataset_paths=(str(samples_dir / "samples.jsonl"),),
            out_dir=str(tmp_path / tag),
            lr=1e-3, batch_size=2, steps=steps, seed=seed,
            mix_ratio=mix, text_corpus_path=corpus,
        )
        return train(tc, tiny_model_cfg(), resume_from=resume), tc

    def test_deterministic_runs(self, tmp_path):
        (res_a, _), (res_b, _) = self._train(tmp_path, "a"), self._train(tmp_path, "b")
        assert res_a.curve == res_b.curve
        assert res_a.checkpoint_path.read_bytes() == res_b.checkpoint_path.read_bytes()

    def test_loss_csv_written(self, tmp_path):
        (res, tc) = self._train(tmp_path, "c")
        csv_path = res.checkpoint_path.parent / "loss.csv"
        lines = csv_path.read_text().splitlines()
        assert lines[0] == "step,loss,component"
        assert len(lines) == tc.steps + 1

    def test_mix_zero_never_draws_text(self, tmp_path):
        (res, _) = self._train(tmp_path, "d", mix=0.0, corpus="bundled")
        assert all(comp == "task" for _, _, comp in res.curve)

    def test_mix_one_always_text(self, tmp_path):
        (res, _) = self._train(tmp_path, "e", mix=1.0, corpus="bundled")
        assert all(comp == "text" for _, _, comp in res.curve)

    def test_resume_bitwise_identical(self, tmp_path):
        (full, _) = self._train(tmp_path, "full", steps=8)
        (half, tc_half) = self._train(tmp_path, "half", steps=4)
        # continue the 4-step run to 8 steps from its checkpoint
        tc_resume = TrainConfig(
            dataset_paths=tc_half.dataset_paths,
            out_dir=str(tmp_path / "resumed"),
            lr=1e-3, batch_size=2, steps=8, seed=3,
            mix_ratio=0.0, text_corpus_path=None,
        )
        resumed = train(tc_resume, tiny_model_cfg(), resume_from=str(half.checkpoint_path))
        assert [c for c in resumed.curve] == full.curve[4:]
        assert resumed.checkpoint_path.read_bytes() == full.checkpoint_path.read_bytes()

    def test_checkpoint_carries_vocab_and_classes(self, tmp_path):
        (res, _) = self._train(tmp_path, "f")
        ck = load_checkpoint(res.checkpoint_path)
        assert ck.vocab.id_to_token == res.vocab.id_to_token
        assert ck.extra["classes"] == ["circle", "square"]

    def test_periodic_checkpoints(self, tmp_path):
        samples_dir = tmp_path / "data"
        write_dataset(
            BuildConfig(classes=("circle",), samples=6, seed=7,
                        relationship_fraction=0.0,
                        tasks=(TaskKind.GENERATE_ALL, TaskKind.CLASSIFICATION)),
            samples_dir,
        )
        tc = TrainConfig(
            dataset_paths=(str(samples_dir / "samples.jsonl"),),
            out_dir=str(tmp_path / "periodic"),
            lr=1e-3, batch_size=1, steps=4, seed=0,
            mix_ratio=0.0, text_corpus_path=None, checkpoint_every=2,
        )
        train(tc, tiny_model_cfg())
        assert (tmp_path / "periodic" / "step-000002.ckpt").exists()
        assert (tmp_path / "periodic" / "model.ckpt").exists()


class TestCorpus:
    def test_bundled_corpus_loads(self):
        text = load_text_corpus("bundled")
        assert len(text) > 50_000
        assert "\n" in text
