from sys import exit

from clfstab.cli import main


if __name__ == '__main__':
    exit(main())
