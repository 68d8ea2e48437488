import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from gvpmon.dataset import (
    FLIP_H,
    TEST,
    TRAIN,
    UNLABELED,
    AnnotationSet,
    FrameFile,
    FrameSource,
    Label,
    augment_flip,
    add_blur,
    format_frame_id,
    format_yolo_line,
    load_annotations,
    parse_frame_id,
    parse_yolo_line,
    read_manifest,
    read_yolo_labels,
    sample_frames,
    sample_timestamps,
    save_annotations,
    split,
    write_manifest,
    write_yolo_labels,
)
from gvpmon.errors import (
    CountExceedsTrain,
    DuplicateFrameId,
    EmptySource,
    OutOfRange,
    ParseError,
    ValidationError,
)
from gvpmon.geometry import NormBox

T0 = parse_frame_id("20240101_000000")


def make_ann(n: int, seed: int = 0) -> AnnotationSet:
    rng = random.Random(seed)
    labels = {}
    for k in range(n):
        fid = format_frame_id(T0 + 300 * k)
        labels[fid] = [Label(rng.randrange(2), NormBox(rng.uniform(0.2, 0.8), 0.5, 0.1, 0.2))
                       for _ in range(rng.randrange(3))]
    return AnnotationSet(labels)


def frame_files(timestamps):
    return [FrameFile(format_frame_id(t), t, None) for t in timestamps]


# --- frame ids and sampling ---------------------------------------------------


def test_frame_id_round_trip():
    assert parse_frame_id("20240101_000000") == 1704067200
    assert format_frame_id(1704067200) == "20240101_000000"
    with pytest.raises(ValidationError):
        parse_frame_id("2024-01-01")
    with pytest.raises(ValidationError):
        parse_frame_id("20241301_000000")


def test_frame_source_scan(tmp_path):
    for name in ("20240101_000500.jpg", "20240101_000000.png", "notes.txt"):
        (tmp_path / name).touch()
    frames = FrameSource(tmp_path).frames()
    assert [f.frame_id for f in frames] == ["20240101_000000", "20240101_000500"]


def test_frame_source_duplicates(tmp_path):
    (tmp_path / "20240101_000000.jpg").touch()
    (tmp_path / "20240101_000000.png").touch()
    with pytest.raises(DuplicateFrameId):
        FrameSource(tmp_path).frames()


def test_frame_source_bad_name(tmp_path):
    (tmp_path / "frame_1.jpg").touch()
    with pytest.raises(ValidationError):
        FrameSource(tmp_path).frames()


def test_sample_empty(tmp_path):
    with pytest.raises(EmptySource):
        sample_frames(FrameSource(tmp_path), 300)
    with pytest.raises(EmptySource):
        sample_frames(FrameSource(tmp_path / "missing"), 300)


def test_sample_examples():
    # 60 days at one frame per 5 minutes
    stubs = sample_frames(frame_files(range(T0, T0 + 60 * 86400, 300)), 300)
    assert len(stubs) == 17280
    one = sample_frames(frame_files([T0]), 300)
    assert [s.timestamp for s in one] == [T0]
    per_second = sample_frames(frame_files(range(T0, T0 + 3600)), 300)
    assert len(per_second) == 3600 // 300
    assert [s.timestamp - T0 for s in per_second] == list(range(0, 3600, 300))


def test_sample_rejects_bad_interval():
    with pytest.raises(ValidationError):
        sample_frames(frame_files([T0]), 0)


@given(st.lists(st.integers(0, 20000), min_size=1, max_size=60, unique=True), st.integers(1, 2000))
def test_sample_size_bound_and_order(ts, interval):
    ts = sorted(ts)
    idx = sample_timestamps(ts, interval)
    picked = [ts[i] for i in idx]
    assert picked[0] == ts[0]
    assert all(a < b for a, b in zip(picked, picked[1:]))
    span = ts[-1] - ts[0]
    assert len(picked) <= math.ceil(span / interval) + 1
    # each picked frame is the earliest of its bucket
    buckets = [(t - ts[0]) // interval for t in picked]
    assert len(set(buckets)) == len(buckets)


# --- YOLO labels ---------------------------------------------------------------


def test_parse_yolo_line_examples():
    lb = parse_yolo_line("0 0.5 0.5 1 1")
    assert lb.class_id == 0 and lb.box == NormBox(0.5, 0.5, 1.0, 1.0)
    with pytest.raises(ParseError):
        parse_yolo_line("0 0.5 0.5 1")
    with pytest.raises(ParseError):
        parse_yolo_line("x 0.5 0.5 1 1")
    with pytest.raises(OutOfRange):
        parse_yolo_line("0 1.5 0.5 0.1 0.1")


def test_read_yolo_labels_empty_and_line_numbers(tmp_path):
    p = tmp_path / "a.txt"
    p.write_text("")
    assert read_yolo_labels(p) == []
    p.write_text("0 0.5 0.5 0.2 0.2\n\n1 0.5 oops 0.1 0.1\n")
    with pytest.raises(ParseError) as exc:
        read_yolo_labels(p)
    assert exc.value.line == 3


def test_format_yolo_line_six_decimals():
    assert format_yolo_line(Label(1, NormBox(0.25, 0.5, 0.1, 1 / 3))) == "1 0.250000 0.500000 0.100000 0.333333"


def test_label_file_round_trip_100_boxes(tmp_path):
    rng = random.Random(7)
    labels = [Label(rng.randrange(2), NormBox(*(rng.random() for _ in range(4)))) for _ in range(100)]
    p = tmp_path / "f.txt"
    write_yolo_labels(p, labels)
    back = read_yolo_labels(p)
    assert len(back) == 100
    for a, b in zip(labels, back):
        assert a.class_id == b.class_id
        for u, v in zip((a.box.cx, a.box.cy, a.box.w, a.box.h), (b.box.cx, b.box.cy, b.box.w, b.box.h)):
            assert abs(u - v) <= 1e-6


def test_annotation_dir_round_trip(tmp_path):
    ann = make_ann(20)
    save_annotations(ann, tmp_path)
    (tmp_path / "classes.txt").write_text("waste\nnon-waste\n")
    back = load_annotations(tmp_path)
    assert back.frame_ids() == ann.frame_ids()
    assert len(back) == 20


def test_annotation_class_range():
    with pytest.raises(ValidationError):
        AnnotationSet({"20240101_000000": [Label(2, NormBox(0.5, 0.5, 0.1, 0.1))]})


def test_annotation_check_against_frames():
    ann = make_ann(3)
    ann.check_against(ann.frame_ids())
    with pytest.raises(ValidationError):
        ann.check_against(ann.frame_ids()[:2])


# --- split and augmentation -------------------------------------------------------


def test_split_examples():
    m = split(make_ann(5000), 0.8, seed=3)
    c = m.counts()
    assert (c["train"], c["test"], c["total"]) == (4000, 1000, 5000)
    one = split(make_ann(1), 0.8).counts()
    assert (one["train"], one["test"]) == (1, 0)


def test_split_deterministic_under_seed():
    ann = make_ann(50)
    assert split(ann, 0.8, seed=11).entries == split(ann, 0.8, seed=11).entries
    assert split(ann, 0.8, seed=11).entries != split(ann, 0.8, seed=12).entries


def test_split_rejects_bad_fraction():
    with pytest.raises(ValidationError):
        split(make_ann(3), 1.0)


def test_split_keeps_unlabeled_pool():
    ann = make_ann(10)
    extra = [format_frame_id(T0 + 300 * k) for k in range(10, 25)]
    m = split(ann, 0.8, unlabeled=ann.frame_ids() + extra)
    c = m.counts()
    assert (c["train"], c["test"], c["unlabeled"], c["annotated"], c["total"]) == (8, 2, 15, 10, 25)
    assert all(not e.labels for e in m.by_split(UNLABELED))


def test_flip_examples():
    lb = Label(0, NormBox(0.3, 0.4, 0.2, 0.1))
    assert lb.flipped().box.cx == pytest.approx(0.7)
    assert lb.flipped().flipped().box.cx == pytest.approx(0.3)
    base = split(make_ann(17280), 0.8, seed=0)
    assert base.counts()["total"] == 17280
    aug = augment_flip(base, 2000, seed=0)
    assert aug.counts()["total"] == 19280
    assert aug.counts()["augmented"] == 2000


def test_flip_only_train_and_preserves_area():
    m = split(make_ann(40), 0.75, seed=1)
    aug = augment_flip(m, 10, seed=2)
    originals = {e.frame_id: e for e in m.entries}
    flipped = [e for e in aug.entries if e.is_augmented]
    assert len({e.frame_id for e in flipped}) == 10
    for e in flipped:
        src = originals[e.frame_id]
        assert src.split == TRAIN and e.split == TRAIN and e.transforms == (FLIP_H,)
        for a, b in zip(src.labels, e.labels):
            assert (a.box.w, a.box.h, a.box.cy) == (b.box.w, b.box.h, b.box.cy)
            assert b.box.cx == pytest.approx(1 - a.box.cx)
    assert aug.by_split(TEST) == m.by_split(TEST)


def test_flip_count_exceeds_train():
    m = split(make_ann(10), 0.8)
    with pytest.raises(CountExceedsTrain):
        augment_flip(m, 9)
    twice = augment_flip(m, 5, seed=0)
    with pytest.raises(CountExceedsTrain):
        augment_flip(twice, 4, seed=1)


def test_blur_directive():
    m = add_blur(augment_flip(split(make_ann(10), 0.8), 3), 1.5)
    assert all(e.transforms == (FLIP_H, "blur(1.5)") for e in m.entries if e.is_augmented)
    assert all(e.transforms == () for e in m.entries if not e.is_augmented)
    with pytest.raises(ValidationError):
        add_blur(m, 0)


def test_manifest_round_trip(tmp_path):
    m = augment_flip(split(make_ann(30), 0.8, unlabeled=[format_frame_id(T0 - 300)]), 5)
    p = tmp_path / "manifest.jsonl"
    write_manifest(m, p)
    back = read_manifest(p)
    assert back.counts() == m.counts()
    assert [e.frame_id for e in back.entries] == [e.frame_id for e in m.entries]
    assert back.preprocess == m.preprocess
    for a, b in zip(m.entries, back.entries):
        assert (a.split, a.transforms, len(a.labels)) == (b.split, b.transforms, len(b.labels))


def test_manifest_parse_error(tmp_path):
    p = tmp_path / "m.jsonl"
    p.write_text('{"frame_id": "x", "split": "train"}\nnot json\n')
    with pytest.raises(ParseError) as exc:
        read_manifest(p)
    assert exc.value.line == 2
