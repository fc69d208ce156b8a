import json
import time
from datetime import datetime, timezone

import numpy as np

from pytwoscale.version import __version__


def _plain(value):
    """Converts numpy scalars and arrays to JSON friendly values."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    return value


def write_json(data, path):
    """Writes ``data`` as UTF-8 JSON with round-trip float precision."""
    with open(path, 'w', encoding='utf-8') as outfile:
        json.dump(_plain(data), outfile, indent=2, sort_keys=True)
    return path


class RunInfo(object):
    """
    This class holds the information needed to repeat a pytwoscale run
    (the run manifest).
    """

    def __init__(self, command, argv, settings, inputs=()):
        """
        Parameters
        ----------
        command : string
            The subcommand, e.g. ``fit2d``.
        argv : list of strings
            The command line arguments after the program name.
        settings : dictionary
            Every resolved setting (flags, config file and defaults).
        inputs : list of strings
            Paths of input files.
        """
        self.command = command
        self.argv = list(argv)
        self.settings = dict(settings)
        self.inputs = list(inputs)
        self.version = __version__
        self.outputs = []
        self.started = datetime.now(timezone.utc).isoformat()
        self._clock = time.perf_counter()
        self.wall_clock = None
        self.exit_code = None

    def add_output(self, path):
        self.outputs.append(str(path))
        return path

    def finish(self, exit_code=0):
        self.wall_clock = time.perf_counter() - self._clock
        self.exit_code = exit_code

    def to_dict(self):
        return {'command': self.command,
                'argv': self.argv,
                'settings': self.settings,
                'inputs': self.inputs,
                'outputs': self.outputs,
                'version': self.version,
                'started': self.started,
                'wall_clock_seconds': self.wall_clock,
                'exit_code': self.exit_code}

    def write(self, path):
        return write_json(self.to_dict(), path)

    @staticmethod
    def read(path):
        """Returns the manifest stored at ``path`` as a dictionary."""
        with open(path, 'r', encoding='utf-8') as infile:
            manifest = json.load(infile)
        if 'argv' not in manifest:
            raise ValueError(f"{path} is not a pytwoscale run manifest")
        return manifest
