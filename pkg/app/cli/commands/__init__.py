"""Comandos da CLI; cada módulo expõe `register(subparsers)` e `run(args)`."""
