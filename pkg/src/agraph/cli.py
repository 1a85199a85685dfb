"""Operator command line: serve, ask, graph import/export, construct, eval.

Exit codes: 0 success, 1 usage error, 2 runtime error. With --json the
stdout payload is machine-readable and schema-stable; diagnostics always
go to stderr. Traces are serialized without timings so identical inputs
produce identical stdout bytes.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import evalkit, kgforge
from .config import (
    build_embedder,
    build_gateway,
    load_config,
    pipeline_config,
)
from .graph import GraphError, KnowledgeGraph, export_graph, import_graph
from .pipeline import Pipeline, PipelineError, UserQuery

USAGE_ERROR = 1
RUNTIME_ERROR = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _add_common(subparser) -> None:
    # mirrored on every subcommand so the flags work in either position;
    # SUPPRESS keeps the subparser from clobbering a value parsed at the root
    subparser.add_argument("--config", default=argparse.SUPPRESS)
    subparser.add_argument("--json", action="store_true", default=argparse.SUPPRESS)


def _build_parser() -> _Parser:
    parser = _Parser(prog="agraph", description="knowledge-graph agent platform")
    parser.add_argument("--config", default=None, help="JSON config file")
    parser.add_argument("--json", action="store_true", default=False,
                        help="machine-readable stdout")
    sub = parser.add_subparsers(dest="command")

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--host")
    serve.add_argument("--port", type=int)
    serve.add_argument("--graph", help="graph interchange file to load")
    serve.add_argument("--provider", choices=["scripted", "http"])
    serve.add_argument("--script", help="scripted-provider fixture file")
    serve.add_argument("--cors-origin")
    _add_common(serve)

    ask = sub.add_parser("ask", help="run one query through the pipeline")
    ask.add_argument("question")
    ask.add_argument("--graph")
    ask.add_argument("--provider", choices=["scripted", "http"])
    ask.add_argument("--script")
    ask.add_argument("--query-mode", choices=["deterministic", "llm", "hybrid"])
    ask.add_argument("--trace", action="store_true", help="include the full trace")
    _add_common(ask)

    graph = sub.add_parser("graph", help="graph file operations")
    graph_sub = graph.add_subparsers(dest="graph_command")
    gexport = graph_sub.add_parser("export", help="write the loaded graph canonically")
    gexport.add_argument("target")
    gexport.add_argument("--graph", required=True, help="source graph file")
    _add_common(gexport)
    gimport = graph_sub.add_parser("import", help="validate a graph file")
    gimport.add_argument("source")
    gimport.add_argument("--out", help="write the canonical form here")
    _add_common(gimport)

    construct = sub.add_parser("construct", help="build a graph from a text corpus")
    construct.add_argument("--corpus", required=True, help="directory of .txt documents")
    construct.add_argument("--schema", required=True, help="relation schema JSON file")
    construct.add_argument("--out", help="write the built graph here")
    construct.add_argument("--stats-out", help="write the stats JSON here")
    construct.add_argument("--provider", choices=["scripted", "http"])
    construct.add_argument("--script")
    _add_common(construct)

    evalp = sub.add_parser("eval", help="evaluation dataset and sweeps")
    eval_sub = evalp.add_subparsers(dest="eval_command")
    egen = eval_sub.add_parser("generate", help="generate candidate queries")
    egen.add_argument("--task-class", type=int, required=True)
    egen.add_argument("--count", type=int, default=10)
    egen.add_argument("--out", required=True)
    egen.add_argument("--provider", choices=["scripted", "http"])
    egen.add_argument("--script")
    _add_common(egen)
    erun = eval_sub.add_parser("run", help="run approved records through the pipeline")
    erun.add_argument("--records", required=True)
    erun.add_argument("--graph")
    erun.add_argument("--out", required=True)
    erun.add_argument("--provider", choices=["scripted", "http"])
    erun.add_argument("--script")
    erun.add_argument("--query-mode", choices=["deterministic", "llm", "hybrid"])
    erun.add_argument("--parallel", type=int, default=1)
    _add_common(erun)
    escore = eval_sub.add_parser("score", help="score verdicts against records")
    escore.add_argument("--records", required=True)
    escore.add_argument("--verdicts", required=True)
    _add_common(escore)

    return parser


def _config_from_args(args) -> dict:
    overrides = {}
    mapping = {
        "graph": "graph_path",
        "provider": "provider",
        "script": "script_path",
        "host": "bind_host",
        "port": "bind_port",
        "cors_origin": "cors_origin",
        "query_mode": "query_mode",
    }
    for attr, key in mapping.items():
        value = getattr(args, attr, None)
        if value is not None:
            overrides[key] = value
    return load_config(args.config, overrides)


def _load_graph(config) -> KnowledgeGraph:
    path = config.get("graph_path")
    if path:
        return import_graph(path)
    return KnowledgeGraph()


def _make_pipeline(config) -> Pipeline:
    return Pipeline(
        _load_graph(config),
        build_gateway(config),
        build_embedder(config),
        pipeline_config(config),
    )


def _emit(args, payload: dict, text: str) -> None:
    if args.json:
        print(json.dumps(payload, ensure_ascii=False, sort_keys=True))
    elif text:
        print(text)


# -- subcommand handlers ------------------------------------------------------------


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    config = _config_from_args(args)
    pipeline = _make_pipeline(config)
    app = create_app(
        pipeline,
        cors_origin=config.get("cors_origin"),
        session_window=int(config["session_window"]),
        session_ttl=float(config["session_ttl"]),
    )
    print(f"serving on {config['bind_host']}:{config['bind_port']}", file=sys.stderr)
    uvicorn.run(app, host=str(config["bind_host"]), port=int(config["bind_port"]))
    return 0


def _cmd_ask(args) -> int:
    config = _config_from_args(args)
    pipeline = _make_pipeline(config)
    try:
        trace = pipeline.run(UserQuery(session_id="cli", text=args.question))
    except PipelineError as exc:
        print(f"error at stage {exc.stage}: {exc.message}", file=sys.stderr)
        if args.json and exc.trace is not None:
            print(json.dumps({"error": {"stage": exc.stage, "message": exc.message},
                              "trace": exc.trace.to_dict(include_timings=False)},
                             ensure_ascii=False, sort_keys=True))
        return RUNTIME_ERROR
    payload = {"answer": trace.response.direct_answer}
    text = trace.response.direct_answer
    if args.trace:
        payload["trace"] = trace.to_dict(include_timings=False)
        text += "\n" + trace.to_json(include_timings=False)
    _emit(args, payload, text)
    return 0


def _cmd_graph(args) -> int:
    if args.graph_command == "export":
        graph = import_graph(args.graph)
        export_graph(graph, args.target)
        _emit(args, {"nodes": len(graph.nodes), "edges": len(graph.edges),
                     "target": args.target},
              f"exported {len(graph.nodes)} nodes, {len(graph.edges)} edges to {args.target}")
        return 0
    if args.graph_command == "import":
        graph = import_graph(args.source)
        if args.out:
            export_graph(graph, args.out)
        _emit(args, {"nodes": len(graph.nodes), "edges": len(graph.edges)},
              f"read {len(graph.nodes)} nodes, {len(graph.edges)} edges from {args.source}")
        return 0
    raise _UsageError("graph needs a subcommand: export | import")


def _cmd_construct(args) -> int:
    config = _config_from_args(args)
    corpus = kgforge.load_corpus(args.corpus)
    schema = kgforge.load_schema(args.schema)
    result = kgforge.build(
        corpus, schema, build_gateway(config), build_embedder(config)
    )
    if args.out:
        export_graph(result.graph, args.out)
    if args.stats_out:
        with open(args.stats_out, "w", encoding="utf-8") as fh:
            json.dump(result.stats, fh, ensure_ascii=False, indent=2, sort_keys=True)
    stats_text = "\n".join(f"{key}: {value}" for key, value in result.stats.items())
    _emit(args, {"stats": result.stats, "dropped_triples": result.dropped_triples},
          stats_text)
    return 0


def _cmd_eval(args) -> int:
    config = _config_from_args(args)
    if args.eval_command == "generate":
        gateway = build_gateway(config)
        records = evalkit.generate_queries(args.task_class, args.count, gateway)
        evalkit.save_records(records, args.out)
        _emit(args, {"generated": len(records), "out": args.out},
              f"generated {len(records)} pending records into {args.out}")
        return 0
    if args.eval_command == "run":
        records = [r for r in evalkit.load_records(args.records) if r.review_status == "approved"]
        gateway = build_gateway(config)
        embedder = build_embedder(config)
        graph = _load_graph(config)
        pconfig = pipeline_config(config)

        def run_one(record):
            # one fresh session per record keeps sweeps order-independent
            pipeline = Pipeline(graph, gateway, embedder, pconfig)
            return pipeline.run(UserQuery(session_id=f"eval-{record.id}", text=record.query))

        if args.parallel > 1:
            from concurrent.futures import ThreadPoolExecutor

            def verdict_for(record):
                return evalkit.run_eval([record], run_one)[0]

            with ThreadPoolExecutor(max_workers=args.parallel) as pool:
                verdicts = list(pool.map(verdict_for, records))
        else:
            verdicts = evalkit.run_eval(records, run_one)
        evalkit.save_verdicts(verdicts, args.out)
        ok = sum(1 for v in verdicts if v.executed_ok)
        _emit(args, {"records": len(records), "executed_ok": ok, "out": args.out},
              f"ran {len(records)} records ({ok} executed ok) into {args.out}")
        return 0
    if args.eval_command == "score":
        records = evalkit.load_records(args.records)
        verdicts = evalkit.load_verdicts(args.verdicts)
        metrics = evalkit.score(verdicts, records)
        if args.json:
            print(evalkit.report(metrics, format="json"))
        else:
            print(evalkit.report(metrics, format="text"), end="")
        return 0
    raise _UsageError("eval needs a subcommand: generate | run | score")


def dispatch(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return USAGE_ERROR
    if args.command is None:
        parser.print_help(sys.stderr)
        return USAGE_ERROR
    handlers = {
        "serve": _cmd_serve,
        "ask": _cmd_ask,
        "graph": _cmd_graph,
        "construct": _cmd_construct,
        "eval": _cmd_eval,
    }
    try:
        return handlers[args.command](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except (GraphError, PipelineError, kgforge.ForgeError, evalkit.JoinError,
            ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
