"""
Flask API wrapper for objcheck
Checks systems of communicating objects sent as JSON, so the checker can be
hosted without installing anything on the client side
"""

import traceback
from typing import Dict, Optional, Tuple

from flask import Flask, Response, jsonify, request

from objcheck import __version__
from objcheck.compat import simulate
from objcheck.composition import system_graph, to_dot
from objcheck.diagnostics import CheckError, dump_document, to_document, visible
from objcheck.objcheck import Workspace, check_workspace, load_sources
from objcheck.options import Options
from objcheck.resolve import resolve

app = Flask(__name__)


@app.route('/', methods=['GET'])
def home():
    """API documentation endpoint"""
    return jsonify({
        "message": "objcheck API",
        "version": __version__,
        "description": "Compatibility and compliance checking for systems of communicating objects",
        "endpoints": {
            "/check": {
                "method": "POST",
                "description": "Check every system in the given sources",
                "parameters": {
                    "sources": "Object mapping file names to source text (required)",
                    "options": "queue_bound, max_configs, invoke_depth, root_systems, show_info (optional)"
                },
                "response": "The JSON diagnostics document, as printed by `objcheck check --format json`"
            },
            "/simulate": {
                "method": "POST",
                "description": "Run one system under a seeded random scheduler",
                "parameters": {
                    "sources": "Object mapping file names to source text (required)",
                    "system": "System to run (required)",
                    "seed": "Integer (optional, default: 0)",
                    "steps": "Maximum number of steps (optional, default: 50)"
                },
                "response": {"system": "string", "seed": "integer", "steps": "array", "final": "object"}
            },
            "/lts": {
                "method": "POST",
                "description": "Synchronous product of one system as Graphviz DOT",
                "parameters": {
                    "sources": "Object mapping file names to source text (required)",
                    "system": "System to export (required)"
                },
                "response": "text/vnd.graphviz"
            }
        }
    })


def _sources(data: Optional[Dict]) -> Tuple[Optional[Workspace], Optional[str]]:
    if not data:
        return None, "Request body is required"
    sources = data.get('sources')
    if not isinstance(sources, dict) or not sources:
        return None, "sources parameter is required"
    if not all(isinstance(k, str) and isinstance(v, str) for k, v in sources.items()):
        return None, "sources must map file names to source text"
    return load_sources(sources), None


def _system(data: Dict, workspace: Workspace) -> Tuple[Optional[str], Optional[str]]:
    name = data.get('system')
    if not name:
        return None, "system parameter is required"
    if name not in workspace.system_names():
        return None, f"no system named {name} in the sources"
    return name, None


@app.route('/check', methods=['POST'])
def check():
    """Check every system of the posted sources"""
    try:
        data = request.get_json(silent=True)
        workspace, error = _sources(data)
        if error:
            return jsonify({"error": error}), 400
        try:
            options = Options.from_dict(data.get('options'))
        except (TypeError, ValueError) as e:
            return jsonify({"error": f"invalid options: {e}"}), 400

        report = check_workspace(workspace, options)
        document = to_document(visible(report.diagnostics, options.show_info))
        return Response(dump_document(document), mimetype='application/json')

    except Exception as e:
        return jsonify({"error": str(e), "traceback": traceback.format_exc()}), 500


@app.route('/simulate', methods=['POST'])
def simulate_system():
    """Simulate one system of the posted sources"""
    try:
        data = request.get_json(silent=True)
        workspace, error = _sources(data)
        if error:
            return jsonify({"error": error}), 400
        name, error = _system(data, workspace)
        if error:
            return jsonify({"error": error}), 400
        seed = data.get('seed', 0)
        steps = data.get('steps', 50)
        if not isinstance(seed, int) or not isinstance(steps, int) or steps < 0:
            return jsonify({"error": "seed and steps must be integers, steps >= 0"}), 400

        try:
            system = resolve(workspace.decls, name)
        except CheckError as e:
            return Response(dump_document(to_document(e.diagnostics)),
                            status=422, mimetype='application/json')
        trace = simulate(system, seed, steps, Options(seed=seed))
        return jsonify(trace.to_dict())

    except Exception as e:
        return jsonify({"error": str(e), "traceback": traceback.format_exc()}), 500


@app.route('/lts', methods=['POST'])
def export_lts():
    """Synchronous product of one system, in DOT"""
    try:
        data = request.get_json(silent=True)
        workspace, error = _sources(data)
        if error:
            return jsonify({"error": error}), 400
        name, error = _system(data, workspace)
        if error:
            return jsonify({"error": error}), 400

        try:
            system = resolve(workspace.decls, name)
            graph, initial = system_graph(system)
        except CheckError as e:
            return Response(dump_document(to_document(e.diagnostics)),
                            status=422, mimetype='application/json')
        text = '\n'.join(to_dot(graph, initial, name)) + '\n'
        return Response(text, mimetype='text/vnd.graphviz')

    except Exception as e:
        return jsonify({"error": str(e), "traceback": traceback.format_exc()}), 500


@app.errorhandler(404)
def not_found(error):
    return jsonify({"error": "Endpoint not found"}), 404


@app.errorhandler(405)
def method_not_allowed(error):
    return jsonify({"error": "Method not allowed"}), 405


if __name__ == '__main__':
    app.run(debug=True, host='0.0.0.0', port=5000)
