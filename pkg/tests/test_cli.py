import json

import numpy as np
import pytest

from sonic import cli, modem


class TestEncodeDecode:
    def test_gpt_wav_round_trip(self, tmp_path, capsys):
        wav = tmp_path / "a.wav"
        assert cli.encode_main(["--gpt", "what is malaria", "--out", str(wav)]) == 0
        assert wav.exists()
        store = tmp_path / "c.db"
        cli.decode_main([str(wav), "--store", str(store), "--dump-dir", str(tmp_path / "d")])
        out = capsys.readouterr().out
        assert "complete" in out
        assert (tmp_path / "d" / "item_1.txt").read_text().startswith("Q: what is malaria")

    def test_fixture_url_encode(self, tmp_path, capsys):
        wav = tmp_path / "p.wav"
        cli.encode_main(["--url", "https://example.org", "--out", str(wav)])
        store = tmp_path / "c.db"
        cli.decode_main([str(wav), "--store", str(store), "--dump-dir", str(tmp_path / "d")])
        assert (tmp_path / "d" / "item_1.png").exists()

    def test_pcm_stdout_pipe(self, tmp_path, capsys, monkeypatch):
        import io
        import sys

        buf = io.BytesIO()

        class FakeStdout:
            buffer = buf

        monkeypatch.setattr(sys, "stdout", FakeStdout())
        cli.encode_main(["--gpt", "hi", "--pcm-stdout"])
        raw = buf.getvalue()
        assert len(raw) > 10_000 and len(raw) % 2 == 0
        samples = np.frombuffer(raw, dtype="<i2")
        got = modem.demodulate([modem.PcmChunk(samples)])
        assert len(got) == 1


class TestSimulateCli:
    def test_degrade_wav(self, tmp_path, capsys):
        wav = tmp_path / "x.wav"
        cli.encode_main(["--gpt", "hello", "--out", str(wav)])
        out = tmp_path / "y.wav"
        cli.simulate_main(["--rssi", "-85", "--seed", "7", "--in", str(wav), "--out", str(out)])
        assert out.exists()
        pcm = modem.read_wav(out)
        assert pcm.samples.size == modem.read_wav(wav).samples.size


class TestQueueSimCli:
    def test_single_run_json_csv(self, tmp_path, capsys):
        out = tmp_path / "r.json"
        csv = tmp_path / "r.csv"
        cli.queuesim_main(
            ["--users", "30", "--freqs", "1", "--seed", "1", "--out", str(out), "--csv", str(csv)]
        )
        data = json.loads(out.read_text())
        assert data["enqueued"] == data["served"] + data["unserved"] + data["skipped"]
        assert csv.read_text().startswith("minute,hour_of_day,queue")

    def test_sweep(self, tmp_path, capsys):
        cli.queuesim_main(["--sweep", "--seed", "1"])
        out = capsys.readouterr().out
        assert "300users_10freq" in out

    def test_push_argument(self, capsys):
        cli.queuesim_main(["--users", "15", "--freqs", "1", "--seed", "1", "--push", "9.5:25"])
        out = capsys.readouterr().out
        assert "peak=" in out
