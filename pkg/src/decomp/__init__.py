"""Decomposition-driven multi-agent orchestration runtime.

The pipeline: clarify a vague request into a constrained problem statement,
decompose it into a dependency-ordered set of subproblems, route each
subproblem to a specialized LLM agent or a deterministic tool, execute the
resulting DAG with bounded parallelism, and synthesize one final answer.
"""

__version__ = "0.1.0"
