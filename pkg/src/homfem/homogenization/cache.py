"""Coefficient cache files and the micro-to-macro material bridge.

The cache is a JSON document::

    {"format": "homfem-coefficients", "version": 1,
     "config_digest": "<sha256>", "correctors_digest": "<sha256>",
     "volume": 1,
     "coefs": {"A": {"shape": [6, 6], "values": [...]}, ...}}

Numbers are written with 17 significant digits so that reading a cache
restores every coefficient bit for bit. Keys are sorted, which makes the
file a deterministic function of the results.
"""
import hashlib
import json
import logging
import math
import os
import tempfile

import numpy as np

from ..config import parse_problem
from ..errors import ConfigError
from .engine import run_engine

log = logging.getLogger(__name__)

FORMAT = 'homfem-coefficients'
VERSION = 1


def _number(x):
    x = float(x)
    if math.isnan(x):
        return 'NaN'
    if math.isinf(x):
        return 'Infinity' if x > 0 else '-Infinity'
    return '%.17g' % x


def config_digest(conf):
    """SHA-256 over the canonical config text and the mesh file bytes."""
    h = hashlib.sha256()
    h.update(f'{FORMAT}/{VERSION}\n'.encode())
    h.update(json.dumps(conf.raw, sort_keys=True, separators=(',', ':'),
                        default=repr).encode())
    if conf.mesh.file:
        path = conf.mesh.file
        if not os.path.isabs(path):
            path = os.path.join(conf.base_dir, path)
        with open(path, 'rb') as fd:
            h.update(fd.read())
    return h.hexdigest()


def correctors_digest(correctors):
    """SHA-256 over every dumped corrector array in a canonical order."""
    h = hashlib.sha256()
    for name in sorted(correctors):
        for idx in sorted(correctors[name]):
            for var in sorted(correctors[name][idx]):
                h.update(f'{name}{idx}{var}'.encode())
                h.update(np.ascontiguousarray(correctors[name][idx][var],
                                              dtype='<f8').tobytes())
    return h.hexdigest()


def dumps_cache(coefs, digest, corr_digest, volume):
    lines = ['{',
             f'  "config_digest": "{digest}",',
             f'  "correctors_digest": "{corr_digest}",',
             '  "coefs": {']
    items = []
    for name in sorted(coefs):
        arr = np.asarray(coefs[name], dtype=np.float64)
        vals = ', '.join(_number(v) for v in arr.ravel())
        shape = ', '.join(str(n) for n in arr.shape)
        items.append(f'    {json.dumps(name)}: {{"shape": [{shape}], '
                     f'"values": [{vals}]}}')
    lines.append(',\n'.join(items))
    lines += ['  },',
              f'  "format": "{FORMAT}",',
              f'  "version": {VERSION},',
              f'  "volume": {_number(volume)}',
              '}']
    return '\n'.join(lines) + '\n'


def loads_cache(text):
    """Parse cache text; returns ``(coefs, config_digest)`` or raises ValueError."""
    data = json.loads(text)
    if not isinstance(data, dict) or data.get('format') != FORMAT:
        raise ValueError('not a coefficient cache')
    if data.get('version') != VERSION:
        raise ValueError(f'unsupported cache version {data.get("version")!r}')
    digest = data['config_digest']
    if not isinstance(digest, str):
        raise ValueError('bad digest')
    coefs = {}
    for name, entry in data['coefs'].items():
        shape = tuple(int(n) for n in entry['shape'])
        vals = np.array(entry['values'], dtype=np.float64)
        if vals.size != int(np.prod(shape)):
            raise ValueError(f'coefficient {name!r}: {vals.size} values for '
                             f'shape {shape}')
        coefs[name] = vals.reshape(shape)
    return coefs, digest


def write_cache(path, results, digest):
    text = dumps_cache(results.coefs, digest,
                       correctors_digest(results.correctors), results.volume)
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=folder, prefix='.coefs-', suffix='.tmp')
    try:
        with os.fdopen(fd, 'w') as out:
            out.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_cache(path):
    with open(path) as fd:
        return loads_cache(fd.read())


def get_homog_coefs_linear(micro_path, cache_path=None, n_workers=None,
                           registry=None, return_info=False):
    """Homogenized coefficients of a micro configuration, cached on disk.

    A cache whose stored config digest matches is loaded without solving
    anything. Any other cache state triggers an engine run and the file is
    (re)written. ``info['cache']`` is one of 'hit', 'miss', 'stale',
    'corrupt' or 'off'.
    """
    conf = parse_problem(micro_path, registry)
    digest = config_digest(conf)
    status = 'off'
    if cache_path is not None:
        status = 'miss'
        if os.path.exists(cache_path):
            try:
                coefs, stored = read_cache(cache_path)
            except (OSError, ValueError, KeyError, TypeError) as exc:
                log.warning('ignoring unreadable cache %s: %s', cache_path, exc)
                status = 'corrupt'
            else:
                if stored == digest:
                    info = {'cache': 'hit', 'corrector_solves': 0,
                            'digest': digest, 'path': cache_path}
                    return (coefs, info) if return_info else coefs
                status = 'stale'
    results = run_engine(conf, n_workers=n_workers, registry=registry)
    if cache_path is not None:
        write_cache(cache_path, results, digest)
    info = {'cache': status, 'digest': digest, 'path': cache_path,
            **results.stats}
    coefs = dict(results.coefs)
    return (coefs, info) if return_info else coefs


def macro_material_bridge(coefs, phi, n_qp):
    """Macro material values from homogenized coefficients.

    Returns ``{'A': (n_qp, sym, sym), 'Pf': (n_qp, sym)}`` with
    ``Pf = sum_k P{k} * phi[k]`` (``P1`` pairs with ``phi[0]``).
    """
    phi = np.atleast_1d(np.asarray(phi, dtype=np.float64))
    if 'A' not in coefs:
        raise ConfigError('homogenized coefficients lack "A"')
    a = np.asarray(coefs['A'], dtype=np.float64)
    pf = np.zeros(a.shape[0])
    for k, val in enumerate(phi, start=1):
        name = f'P{k}'
        if name not in coefs:
            raise ConfigError(f'homogenized coefficients lack {name!r} for '
                              f'{len(phi)} conductor potential(s)')
        pf = pf + np.asarray(coefs[name], dtype=np.float64) * val
    return {'A': np.tile(a, (n_qp, 1, 1)), 'Pf': np.tile(pf, (n_qp, 1))}
