/* Drives one conversation through the shared library from C. */
#include <stdio.h>
#include <string.h>

#include "flowstack.h"

static int fail(const char *what, FsStatus status) {
    const char *message = fs_last_error();
    fprintf(stderr, "%s failed with %d: %s\n", what, (int)status, message ? message : "(none)");
    return 1;
}

int main(int argc, char **argv) {
    if (argc != 2) {
        fprintf(stderr, "usage: %s <assistant-dir>\n", argv[0]);
        return 2;
    }
    FsAssistant *assistant = NULL;
    FsStatus status = fs_assistant_load(argv[1], true, &assistant);
    if (status != FS_STATUS_OK) return fail("load", status);

    FsSession *session = NULL;
    status = fs_session_new(assistant, "from-c", &session);
    if (status != FS_STATUS_OK) return fail("session", status);

    char *reply = NULL;
    status = fs_session_send(session, "what's my balance?", &reply);
    if (status != FS_STATUS_OK) return fail("send", status);
    printf("%s\n", reply);
    fs_string_free(reply);

    status = fs_session_send(NULL, "hi", &reply);
    if (status != FS_STATUS_NULL_POINTER) return fail("null session check", status);

    fs_session_free(session);
    fs_assistant_free(assistant);
    printf("version %s\n", fs_version());
    return 0;
}
