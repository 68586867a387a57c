'''Small helpers shared across modules: seed derivation, atomic file output
'''
import hashlib
import os
import tempfile
from pathlib import Path


def derive_seed(base_seed, *parts):
    '''Derive a 64-bit seed from a base seed and any printable parts

    The result depends only on the values, never on call order, so grid rows
    and folds get stable streams however they are scheduled.
    '''
    digest = hashlib.blake2b(digest_size=8)
    digest.update(str(int(base_seed)).encode('utf-8'))
    for part in parts:
        digest.update(b'\x1f')
        digest.update(str(part).encode('utf-8'))
    return int.from_bytes(digest.digest(), 'little')


def atomic_write_text(path, text):
    '''Write text to path through a temporary file and a rename
    '''
    path = Path(path)
    directory = path.parent if str(path.parent) else Path('.')
    directory.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(
        prefix='.{}.'.format(path.name), suffix='.tmp', dir=str(directory)
    )
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='') as ofile:
            ofile.write(text)
        os.replace(tmp_name, str(path))
    except BaseException:
        if os.path.exists(tmp_name):
            os.remove(tmp_name)
        raise


def percent_change(old, new):
    '''Relative change of new against old, in percent
    '''
    if old == 0:
        return float('nan')
    return (new - old) / old * 100.0
