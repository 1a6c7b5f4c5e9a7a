"""Workbench for profiling, analyzing, and simulating LLM-powered multi-agent
task-management systems across autonomy and alignment levels."""

__version__ = "0.1.0"
