#!/usr/bin/env python
import unittest
from setuptools import setup


def metastab_testsuite():
    test_loader = unittest.TestLoader()
    test_suite = test_loader.discover('tests', pattern='test_*.py')
    return test_suite


setup(name='metastab',
      version='0.1.0',
      description='Explicit metastable convergence bounds by bar recursion',
      long_description="""metastab computes the bound of the metastable convergence theorem by recursion
      along the tree of unsecured sequences, derives quantitative Egorov and dominated convergence bounds
      from it, and checks every bound exactly on finite probability spaces, relying on pandas and numpy.
      """,
      packages=['metastab'],
      package_dir={'metastab': 'metastab'},
      license='Artistic-2.0',
      python_requires='>=3.8',
      install_requires=[
          'pandas', 'numpy'
      ],
      tests_require=[
          'hypothesis'
      ],
      extras_require={
          'test': ['hypothesis', 'pytest'],
      },
      entry_points={
          'console_scripts': ['metastab=metastab.cli:main'],
      },
      platforms=['Windows', 'Linux', 'MacOS'],
      classifiers=[
          'Topic :: Scientific/Engineering :: Mathematics',
          'Development Status :: 3 - Alpha',
          'License :: OSI Approved :: Artistic License',
          'Intended Audience :: Science/Research',
          'Intended Audience :: Education',
          'Natural Language :: English',
          'Operating System :: OS Independent',
          'Programming Language :: Python :: 3',
          'Programming Language :: Python :: 3.8',
          'Programming Language :: Python :: 3.9',
          'Programming Language :: Python :: 3.10',
          'Programming Language :: Python :: 3.11',
          'Programming Language :: Python :: Implementation :: CPython',
      ],
      keywords='metastability bar recursion proof mining egorov dominated convergence',
      test_suite='setup.metastab_testsuite'
      )
