"""Command line entry point: `aoisim-plots render --spec PATH`."""

import sys

import click

from .figures import FigureSpecError, load_spec, render
from .metrics_io import MetricsParseError


@click.group()
def main():
    """Render figures from simulator metrics files."""


@main.command("render")
@click.option("--spec", "spec_paths", multiple=True, required=True,
              type=click.Path(exists=True),
              help="Figure spec JSON; repeatable for batch rendering.")
def render_cmd(spec_paths):
    for path in spec_paths:
        try:
            spec = load_spec(path)
            out = render(spec)
        except (FigureSpecError, MetricsParseError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)
        click.echo(out)


if __name__ == "__main__":
    main()
