from coverlens.cli import main

main()
