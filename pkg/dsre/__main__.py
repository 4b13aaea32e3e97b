from dsre.main import main

main()
