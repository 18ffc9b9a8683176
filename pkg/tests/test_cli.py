import json

import pytest

from privgate.cli import main

KEVIN_INPUT = "I feel exhausted and not willing to do anything"
KEVIN_FULL = (
    "My friend Kevin reports the following: Kevin feels exhausted and not "
    "willing to do anything. Please generate advice directed to Kevin."
)


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestDetect:
    def test_detect_file(self, tmp_path, capsys):
        src = tmp_path / "in.txt"
        src.write_text("mail alice@example.com now", encoding="utf-8")
        code, out, _ = run(capsys, "detect", str(src))
        assert code == 0
        assert "Email" in out and "alice@example.com" in out

    def test_detect_stdin(self, capsys, monkeypatch):
        import io

        monkeypatch.setattr("sys.stdin", io.StringIO("call 617-555-0142"))
        code, out, _ = run(capsys, "detect", "-")
        assert code == 0 and "PhoneNumber" in out

    def test_structured_output_is_json(self, tmp_path, capsys):
        src = tmp_path / "in.txt"
        src.write_text("mail alice@example.com now", encoding="utf-8")
        code, out, _ = run(capsys, "detect", str(src), "--format", "json")
        spans = json.loads(out)["spans"]
        assert spans[0]["category"] == "Email"
        assert set(spans[0]) == {"start", "end", "surface", "category", "confidence", "source"}

    def test_no_spans_message(self, tmp_path, capsys):
        src = tmp_path / "in.txt"
        src.write_text("nothing here", encoding="utf-8")
        code, out, _ = run(capsys, "detect", str(src))
        assert code == 0 and out.strip() == "no spans"


class TestRoundTrip:
    def test_redact_then_rehydrate_restores_input(self, tmp_path, capsys):
        store = str(tmp_path / "store")
        code, sid, _ = run(capsys, "session", "create", "--store", store)
        assert code == 0
        sid = sid.strip()

        src = tmp_path / "in.txt"
        original = "I study at MIT and my name is John Smith."
        src.write_text(original, encoding="utf-8")

        code, secured, _ = run(capsys, "redact", str(src), "--session", sid, "--store", store)
        assert code == 0
        assert "John Smith" not in secured and "MIT" not in secured

        mid = tmp_path / "secured.txt"
        mid.write_text(secured, encoding="utf-8")
        code, restored, _ = run(capsys, "rehydrate", str(mid), "--session", sid, "--store", store)
        assert code == 0
        assert restored == original

    def test_unknown_session_exits_2_with_message(self, tmp_path, capsys):
        src = tmp_path / "in.txt"
        src.write_text("x", encoding="utf-8")
        code, _, err = run(
            capsys, "redact", str(src), "--session", "nope", "--store", str(tmp_path / "s")
        )
        assert code == 2
        assert "no session" in err

    def test_session_show_lists_entries(self, tmp_path, capsys):
        store = str(tmp_path / "store")
        _, sid, _ = run(capsys, "session", "create", "--store", store)
        sid = sid.strip()
        src = tmp_path / "in.txt"
        src.write_text("ask John Smith", encoding="utf-8")
        run(capsys, "redact", str(src), "--session", sid, "--store", store)
        code, out, _ = run(capsys, "session", "show", sid, "--store", store)
        assert code == 0 and "Person A" in out and "John Smith" in out

    def test_session_purge(self, tmp_path, capsys):
        store = str(tmp_path / "store")
        _, sid, _ = run(capsys, "session", "create", "--store", store)
        sid = sid.strip()
        code, out, _ = run(capsys, "session", "purge", sid, "--store", store)
        assert code == 0
        code, _, err = run(capsys, "session", "show", sid, "--store", store)
        assert code == 2


class TestSmokescreen:
    def test_reproduces_paper_example_verbatim(self, tmp_path, capsys):
        src = tmp_path / "in.txt"
        src.write_text(KEVIN_INPUT, encoding="utf-8")
        code, out, _ = run(capsys, "smokescreen", str(src))
        assert code == 0
        assert out.strip() == KEVIN_FULL


class TestEval:
    def test_single_trivial_case_scores_perfectly(self, tmp_path, capsys):
        corpus = tmp_path / "corpus"
        corpus.mkdir()
        text = "mail alice@example.com now"
        (corpus / "one.txt").write_text(text, encoding="utf-8")
        start = text.index("alice@example.com")
        (corpus / "one.spans").write_text(
            f"{start}\t{start + len('alice@example.com')}\tEmail\talice@example.com\n",
            encoding="utf-8",
        )
        code, out, _ = run(capsys, "eval", "--corpus", str(corpus), "--format", "json")
        assert code == 0
        metrics = json.loads(out)
        assert metrics["Email"]["precision"] == 1.0
        assert metrics["Email"]["recall"] == 1.0

    def test_empty_corpus_is_explicit_error(self, tmp_path, capsys):
        empty = tmp_path / "corpus"
        empty.mkdir()
        code, _, err = run(capsys, "eval", "--corpus", str(empty))
        assert code == 2
        assert "no cases" in err

    def test_missing_dir_is_error(self, tmp_path, capsys):
        code, _, err = run(capsys, "eval", "--corpus", str(tmp_path / "nowhere"))
        assert code == 2


class TestExitCodes:
    def test_usage_error_is_1(self, capsys):
        code, _, err = run(capsys, "redact")  # missing required args
        assert code == 1

    def test_unknown_command_is_1(self, capsys):
        code, _, _ = run(capsys, "frobnicate")
        assert code == 1
