import setuptools
import re


def read_description(path='README.md'):
    with open(path) as f:
        return f.read()


def scrape_version(path='infinifree/version.py'):
    with open(path) as f:
        text = f.read()

    m = re.search(r'''__version__ = ['"](.*?)['"]''', text)
    if m:
        return m.group(1)


def read_requirements(path='requirements.txt'):
    with open(path) as f:
        # Runtime requirements come first; dev tools follow the blank line.
        runtime, _, _ = f.read().partition('\n\n')
    return [line.strip() for line in runtime.splitlines() if line.strip()]


setuptools.setup(
    name='infinifree',
    version=scrape_version(),
    author='Daniel Foerster',
    author_email='pydsigner@gmail.com',
    description='Infinifree: scalar and operator-valued infinitesimal free probability',
    long_description=read_description(),
    long_description_content_type='text/markdown',
    license_files=['LICENSE'],
    url='https://github.com/pydsigner/infinifree',
    packages=['infinifree'],
    install_requires=read_requirements(),
    entry_points={
        'console_scripts': ['infinifree = infinifree.cli:main'],
    },
    classifiers=[
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        'Development Status :: 4 - Beta',
        'Intended Audience :: Science/Research',
        'Operating System :: OS Independent',
        'License :: OSI Approved :: Apache Software License',
        'Topic :: Scientific/Engineering :: Mathematics',
    ],
    python_requires='>=3.9',
)
