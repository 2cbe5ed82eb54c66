/* Kvaser Leaf family: command helpers ported from the core driver */

#include "kvaser_usb.h"

static int kvaser_usb_leaf_send_cmd(const struct kvaser_usb *dev, struct kvaser_cmd *cmd, int len)
{
	int actual_len;

	return usb_bulk_msg(dev->udev, dev->bulk_out, cmd, len, &actual_len, 1000);
}

static int kvaser_usb_leaf_send_simple_cmd(const struct kvaser_usb *dev, u8 cmd_id, int channel)
{
	struct kvaser_cmd *cmd;
	int rc;

	cmd = kmalloc(sizeof(*cmd), GFP_KERNEL);
	if (!cmd)
		return -ENOMEM;

	cmd->id = cmd_id;
	cmd->len = CMD_SIZE_ANY;
	cmd->channel = channel;

	rc = kvaser_usb_leaf_send_cmd(dev, cmd, cmd->len);

	kfree(cmd);
	return rc;
}
