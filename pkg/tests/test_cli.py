import pytest

from corpus_synth import synth_corpus

from stegotext.cli import main


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    corpus = root / "corpus.txt"
    with corpus.open("w", encoding="utf-8") as fh:
        for doc in synth_corpus(n_docs=150):
            fh.write(" ".join(doc) + "\n")
    model = root / "model.nglm"
    assert main(["train-ngram", "--corpus", str(corpus), "--order", "2",
                 "--alpha", "0.15", "--out", str(model)]) == 0
    key = root / "key.toml"
    key.write_text(f"""
[model]
kind = "ngram"
path = "{model}"

[cover]
method = "arithmetic"
context = "the president said . people in the city ."
temperature = 0.8
top_k = 300
precision = 32

[source]
temperature = 1.0
precision = 32
""", encoding="utf-8")
    return root, key


def test_encode_decode_roundtrip(workspace, capsys):
    root, key = workspace
    cover = root / "cover.ids"
    assert main(["encode", "--key", str(key), "--message-bits", "deadbeef",
                 "--out", str(cover)]) == 0
    assert main(["decode", "--key", str(key), "--cover", str(cover)]) == 0
    assert capsys.readouterr().out.strip() == "deadbeef"


def test_hide_reveal_roundtrip(workspace, capsys):
    root, key = workspace
    cover = root / "hidden.ids"
    message = "the court found the law good ."
    assert main(["hide", "--key", str(key), "--message", message,
                 "--out", str(cover)]) == 0
    assert main(["reveal", "--key", str(key), "--cover", str(cover)]) == 0
    assert capsys.readouterr().out.strip() == message


def test_cover_text_output(workspace, capsys):
    _, key = workspace
    assert main(["hide", "--key", str(key), "--message", "people said so .",
                 "--text"]) == 0
    out = capsys.readouterr().out.strip()
    assert out and all(not w.isdigit() for w in out.split())


def test_eval_deterministic(workspace):
    root, key = workspace
    grid = "arithmetic=0.7,1.0;huffman=2,8;block=1,3"
    args = ["eval", "--key", str(key), "--grid", grid, "--samples", "6",
            "--seed", "3", "--payload-bits", "64"]
    assert main(args + ["--out", str(root / "a.csv"),
                        "--json", str(root / "a.json"),
                        "--gnuplot", str(root / "a.dat")]) == 0
    assert main(args + ["--out", str(root / "b.csv")]) == 0
    assert (root / "a.csv").read_bytes() == (root / "b.csv").read_bytes()
    assert (root / "a.json").exists() and (root / "a.dat").exists()


def test_decode_with_wrong_block_seed_exits_desync(workspace, capsys):
    root, key = workspace
    block_key = root / "block_key.toml"
    wrong_key = root / "block_key_wrong.toml"
    base = key.read_text().replace('method = "arithmetic"',
                                   'method = "block"\nblock_bits = 2\nblock_seed = 41')
    block_key.write_text(base, encoding="utf-8")
    wrong_key.write_text(base.replace("block_seed = 41", "block_seed = 40"),
                         encoding="utf-8")
    cover = root / "block_cover.ids"
    assert main(["encode", "--key", str(block_key), "--message-bits", "ff00aa",
                 "--out", str(cover)]) == 0
    code = main(["decode", "--key", str(wrong_key), "--cover", str(cover)])
    capsys.readouterr()
    assert code == 4


def test_message_too_long_exit_code(workspace, tmp_path, capsys):
    root, key = workspace
    # huffman with truncation 2 moves one bit per token, so a huge payload
    # blows the default token budget long before completing -- instead use
    # an unreachable message token to hit the data-error path
    code = main(["hide", "--key", str(key), "--message", "the the zzznotaword"])
    capsys.readouterr()
    assert code == 7


def test_missing_key_file(capsys):
    code = main(["encode", "--key", "/nonexistent/key.toml",
                 "--message-bits", "ff"])
    capsys.readouterr()
    assert code == 7


def test_bad_cover_file(workspace, capsys):
    root, key = workspace
    bad = root / "bad.ids"
    bad.write_text("not numbers\n", encoding="utf-8")
    code = main(["decode", "--key", str(key), "--cover", str(bad)])
    capsys.readouterr()
    assert code == 7
