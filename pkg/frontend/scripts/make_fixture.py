"""Build the integration-test fixture: two identical pipeline states plus the
oracle texts for the pending batch.

Usage: python3 scripts/make_fixture.py <out_dir>

Writes into <out_dir>:
  api_state.json  state with a 10-task pending batch, to be served over HTTP
  cli_state.json  the same state advanced via `label --oracle`
  oracle.json     sample id -> oracle text for the pending batch
"""

import json
import shutil
import sys
from pathlib import Path

from click.testing import CliRunner

from alspeech import simulate
from alspeech.cli import main
from alspeech.storage import load_state, save_embeddings, save_manifest


def run(args):
    result = CliRunner().invoke(main, args, catch_exceptions=False)
    if result.exit_code != 0:
        raise SystemExit(f"cli {' '.join(args)} failed: {result.output}")


def build(out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = simulate.SyntheticCorpusSpec(
        cluster_sizes=(30, 30, 6), dim=4, seed=0, vocab_size=20
    )
    corpus = simulate.generate_corpus(spec)
    manifest_path = out / "manifest.jsonl"
    embeddings_path = out / "emb.bin"
    save_manifest(corpus.manifest, manifest_path)
    save_embeddings(corpus.embeddings, embeddings_path)

    cli_state = out / "cli_state.json"
    run([
        "ingest", "--manifest", str(manifest_path),
        "--embeddings", str(embeddings_path),
        "--out-state", str(cli_state),
        "--target", "10", "--iterations", "2", "--committee-size", "4",
        "--seed", "0",
    ])
    run(["cluster", "--state", str(cli_state), "--eps", "3.0",
         "--metric", "euclidean"])
    run(["select", "--state", str(cli_state), "--stage", "initial"])

    state = load_state(cli_state)
    oracle = {
        sid: state.records[sid].oracle_text for sid in state.pending_batch.ids
    }
    (out / "oracle.json").write_text(json.dumps(oracle, indent=2) + "\n")

    shutil.copyfile(cli_state, out / "api_state.json")
    run(["label", "--state", str(cli_state), "--oracle"])


if __name__ == "__main__":
    build(sys.argv[1])
