'''
    clfstab: feedback synthesis from control-Lyapunov functions, sampled
    closed loops with measurement error, Brockett obstruction tests and ISS
    analysis tools. The command line lives in clfstab.cli.
'''


__version__ = '0.1.0'
