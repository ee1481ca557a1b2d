from afu.cli import main

main()
