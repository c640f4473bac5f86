from signsym.corpus import GoldEntity
from signsym.evaluation import evaluate_exact, lexicon_overlap
from signsym.figures import render_eval_report, render_overlap

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def eval_report():
    gold = [
        GoldEntity("n1", "sign_symptom", 0, 5, "fever"),
        GoldEntity("n1", "negation", 8, 10, "no"),
    ]
    predicted = [GoldEntity("n1", "sign_symptom", 0, 5, "fever")]
    return evaluate_exact(gold, predicted)


def assert_png(path):
    data = path.read_bytes()
    assert data.startswith(PNG_MAGIC)
    assert len(data) > 1000


def test_render_eval_report(tmp_path):
    path = render_eval_report(eval_report(), tmp_path / "eval.png")
    assert_png(path)


def test_render_overlap_two_sets(tmp_path):
    report = lexicon_overlap({"a": {"x", "y"}, "b": {"y", "z"}})
    assert_png(render_overlap(report, tmp_path / "two.png"))


def test_render_overlap_three_sets(tmp_path):
    report = lexicon_overlap(
        {"a": {"x", "y"}, "b": {"y", "z"}, "c": {"z", "x", "w"}}
    )
    assert_png(render_overlap(report, tmp_path / "three.png"))


def test_render_overlap_four_sets_falls_back_to_bars(tmp_path):
    report = lexicon_overlap(
        {
            "a": {"x", "y"},
            "b": {"y", "z"},
            "c": {"z", "x"},
            "d": {"w"},
        }
    )
    assert_png(render_overlap(report, tmp_path / "four.png"))
