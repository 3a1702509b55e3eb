"""Command-line pipeline: ingest -> build-lm -> build-dataset -> train ->
expand / evaluate / cluster / serve.

Sentence files are one normalized sentence per line, tokens space-joined,
UTF-8. Dataset files are TSV pairs (kernel TAB original). See README for
the full walkthrough.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .clustering import ClusterConfig, cluster_report
from .compressor import (
    CompressionConfig,
    build_parallel_corpus,
    load_pairs,
    mean_compression_rate,
    save_pairs,
)
from .config import AppConfig, resolve_config_path
from .metrics import evaluate_file
from .ngram_lm import build_lm, read_arpa, write_arpa
from .seq2seq import FocusedLossConfig, ModelConfig, TrainConfig, save_model, train
from .service import Artifacts, handle_compress, handle_expand, make_server
from .textprep import Sentence, Vocab, filter_corpus, segment_text


def _read_sentences(path: str) -> list[Sentence]:
    sentences = []
    with open(path, encoding="utf-8") as f:
        for i, line in enumerate(f):
            tokens = line.split()
            if tokens:
                sentences.append(Sentence(tuple(tokens), f"{path}:{i}"))
    return sentences


def _write_sentences(sentences: list[Sentence], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for s in sentences:
            f.write(" ".join(s.tokens) + "\n")


def _bounds(text: str) -> tuple[float, float]:
    lo, hi = text.split(",")
    return float(lo), float(hi)


def cmd_ingest(args) -> int:
    sentences: list[Sentence] = []
    for path in args.inputs:
        with open(path, encoding="utf-8") as f:
            sentences.extend(segment_text(f.read(), source_id=path))
    kept = filter_corpus(sentences, args.min_len, args.max_len, args.stopword_bounds)
    if args.blocklist:
        with open(args.blocklist, encoding="utf-8") as f:
            blocked = {line.strip().lower() for line in f if line.strip()}
        kept = [s for s in kept if not blocked.intersection(s.tokens)]
    _write_sentences(kept, args.output)
    print(f"ingested {len(sentences)} sentences, kept {len(kept)} -> {args.output}")
    return 0


def cmd_build_lm(args) -> int:
    corpus = _read_sentences(args.sentences)
    vocab = Vocab.build(corpus, max_size=args.max_vocab)
    lm = build_lm(corpus, vocab, prune_threshold=args.prune)
    write_arpa(lm, args.output)
    print(f"built LM over {len(vocab)} tokens, {lm.ngram_count()} n-grams -> {args.output}")
    return 0


def cmd_compress(args) -> int:
    artifacts = Artifacts.load(lm_path=args.lm)
    result = handle_compress(
        artifacts, {"sentence": args.sentence, "target_rate": args.rate}
    )
    print(result["kernel"])
    print(f"achieved rate: {result['achieved_rate']:.3f}", file=sys.stderr)
    return 0


def cmd_build_dataset(args) -> int:
    corpus = _read_sentences(args.sentences)
    lm = read_arpa(args.lm)
    config = CompressionConfig(
        target_rate=args.rate, min_reduction_for_dataset=args.min_reduction
    )
    train_pairs, dev_pairs = build_parallel_corpus(
        corpus, lm, config, dev_holdout=args.dev, seed=args.seed
    )
    save_pairs(train_pairs, args.output)
    if args.dev_output:
        save_pairs(dev_pairs, args.dev_output)
    rate = mean_compression_rate(train_pairs + dev_pairs)
    print(
        f"{len(train_pairs)} train / {len(dev_pairs)} dev pairs, "
        f"mean compression rate {rate:.3f} -> {args.output}"
    )
    return 0


def cmd_train(args) -> int:
    pairs = load_pairs(args.pairs)
    vocab = Vocab.build(
        [p.original for p in pairs] + [p.kernel for p in pairs], max_size=args.max_vocab
    )
    model_config = ModelConfig(
        vocab_size=len(vocab), embed_dim=args.embed, hidden_dim=args.hidden, layers=args.layers
    )
    loss_config = FocusedLossConfig(lam=getattr(args, "lambda"))
    train_config = TrainConfig(
        steps=args.steps,
        learning_rate=args.lr,
        batch_size=args.batch,
        dropout=args.dropout,
        seed=args.seed,
    )
    model, history = train(pairs, vocab, model_config, loss_config, train_config)
    save_model(model, args.output, loss_config)
    for step, loss in history:
        print(f"step {step}: loss {loss:.4f}")
    print(f"saved checkpoint -> {args.output}")
    return 0


def cmd_expand(args) -> int:
    artifacts = Artifacts.load(lm_path=args.lm, checkpoint_path=args.model)
    overrides = {}
    if args.temperature is not None:
        overrides["base_temperature"] = args.temperature
    if args.target_novelty is not None:
        overrides["target_total_novelty"] = args.target_novelty
    if args.top_k is not None:
        overrides["top_k"] = args.top_k
    if args.expansion_factor is not None:
        overrides["expansion_factor"] = args.expansion_factor
    response = handle_expand(
        artifacts,
        {
            "sentence": args.sentence,
            "method": args.method,
            "candidate_count": args.candidates,
            "seed": args.seed,
            "overrides": overrides,
        },
    )
    if args.json:
        print(json.dumps(response, ensure_ascii=False, indent=1))
        return 0
    print(f"input: {response['input_text']}")
    for i, cand in enumerate(response["candidates"]):
        flag = f"  [filtered: {cand['filter_reason']}]" if cand["filtered"] else ""
        m = cand["metrics"]
        print(f"[{i}] {cand['text']}{flag}")
        print(
            f"    ratio {m['expansion_ratio']:.2f}, added {m['added_words']}, "
            f"dist1 {m['dist1']:.2f}, novelty {sum(cand['trace']['novelty']):.3f}",
            file=sys.stderr,
        )
    return 0


def cmd_evaluate(args) -> int:
    aggregates = evaluate_file(args.pairs, args.output)
    for key, value in aggregates.items():
        print(f"{key}: {value:.4f}")
    return 0


def cmd_cluster(args) -> int:
    sentences = _read_sentences(args.sentences)
    reports = []
    for k in args.k:
        config = ClusterConfig(
            k=k,
            vectorizer=args.vectorizer,
            max_features=args.max_features,
            df_bounds=args.df,
            lsa_dims=args.lsa_dims,
            seed=args.seed,
        )
        reports.append(cluster_report(sentences, config))
    payload = reports[0] if len(reports) == 1 else {"sweep": reports}
    text = json.dumps(payload, ensure_ascii=False, indent=1)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as f:
            f.write(text + "\n")
    print(text)
    return 0


def cmd_serve(args) -> int:
    path = resolve_config_path(args.config)
    config = AppConfig.from_file(path) if path else AppConfig()
    lm_path = args.lm or config.lm
    checkpoint = args.model or config.checkpoint
    host = args.host or config.host
    port = args.port if args.port is not None else config.port
    static_dir = args.static_dir or config.static_dir
    artifacts = Artifacts.load(lm_path=lm_path, checkpoint_path=checkpoint)
    server = make_server(artifacts, host, port, static_dir)
    kinds = [k for k, v in (("expansion model", artifacts.model), ("LM", artifacts.lm)) if v]
    print(f"serving on http://{host}:{port} with {', '.join(kinds) or 'no artifacts'}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kernelsmith",
        description="Sentence expansion toolkit: compression-built data, "
        "focused seq2seq training, novelty-curve decoding.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="segment and normalize raw text files")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--output", required=True)
    p.add_argument("--min-len", type=int, default=2)
    p.add_argument("--max-len", type=int, default=50)
    p.add_argument("--stopword-bounds", type=_bounds, default=(0.1, 0.9))
    p.add_argument("--blocklist", help="file of tokens whose sentences are dropped")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("build-lm", help="estimate the KN trigram LM, write ARPA")
    p.add_argument("--sentences", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--prune", type=float, default=1e-7)
    p.add_argument("--max-vocab", type=int, default=50_000)
    p.set_defaults(func=cmd_build_lm)

    p = sub.add_parser("compress", help="compress one sentence to its kernel")
    p.add_argument("--lm", required=True)
    p.add_argument("--sentence", required=True)
    p.add_argument("--rate", type=float, default=0.4)
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("build-dataset", help="compress a corpus into kernel/original pairs")
    p.add_argument("--sentences", required=True)
    p.add_argument("--lm", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--dev-output")
    p.add_argument("--rate", type=float, default=0.4)
    p.add_argument("--min-reduction", type=float, default=0.3)
    p.add_argument("--dev", type=int, default=0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("train", help="train the expansion model on a pair TSV")
    p.add_argument("--pairs", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--lr", type=float, default=2e-3)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--lambda", type=float, default=9.0, help="focusing factor")
    p.add_argument("--embed", type=int, default=32)
    p.add_argument("--hidden", type=int, default=64)
    p.add_argument("--layers", type=int, default=1)
    p.add_argument("--max-vocab", type=int, default=50_000)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("expand", help="decode expansions of a sentence")
    p.add_argument("--sentence", required=True)
    p.add_argument("--model", help="expansion-model checkpoint")
    p.add_argument("--lm", help="ARPA LM (fallback step model)")
    p.add_argument("--method", default="parabola_c")
    p.add_argument("--candidates", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--temperature", type=float)
    p.add_argument("--target-novelty", type=float)
    p.add_argument("--top-k", type=int)
    p.add_argument("--expansion-factor", type=float)
    p.add_argument("--json", action="store_true", help="print the full response")
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("evaluate", help="score a TSV of input/output[/reference] rows")
    p.add_argument("--pairs", required=True)
    p.add_argument("--output", required=True, help="per-row CSV report")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("cluster", help="topic-cluster a sentence file")
    p.add_argument("--sentences", required=True)
    p.add_argument("--k", type=lambda s: [int(v) for v in s.split(",")], default=[10])
    p.add_argument("--vectorizer", choices=("tfidf", "hashing"), default="tfidf")
    p.add_argument("--max-features", type=int, default=10_000)
    p.add_argument("--df", type=_bounds, default=(1e-5, 1e-2))
    p.add_argument("--lsa-dims", type=int, default=None,
                   help="LSA components (the study swept 50/100/200/300)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", help="also write the JSON report here")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--config", help=f"config file (or ${'{'}KERNELSMITH_CONFIG{'}'})")
    p.add_argument("--lm")
    p.add_argument("--model")
    p.add_argument("--host")
    p.add_argument("--port", type=int)
    p.add_argument("--static-dir", help="serve this directory at / (the studio UI)")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
