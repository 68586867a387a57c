'''Fair post-processing of blackbox multiclass predictions
'''

__version__ = '0.1.0'
