import os

from setuptools import setup, find_packages

this_dir = os.path.realpath(os.path.dirname(__file__))


def get_version():
    """Read __version__ from the package without importing it."""
    with open(os.path.join(this_dir, 'bdsde', '__init__.py')) as f:
        for line in f:
            if line.startswith('__version__'):
                return line.split('=')[1].strip().strip("'\"")
    raise RuntimeError('unable to find __version__ in bdsde/__init__.py')


def main():
    setup(
        version=get_version(),
        packages=find_packages(include=['bdsde', 'bdsde.*']),
        zip_safe=False,
    )


if __name__ == '__main__':
    main()
